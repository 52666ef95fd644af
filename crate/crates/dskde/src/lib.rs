//! Doubly smoothed kernel density estimation for fixed-camera image stacks.
//!
//! Grayscale frames from a stationary camera are modelled pixel-wise: the
//! intensity at each lattice location is a random draw from an unknown
//! density over the value domain `[0, 1]`. This crate estimates those
//! densities three ways:
//!
//! - **CD**: the classical per-location kernel density estimate over the
//!   value domain ([`estimators::cd_estimate`]).
//! - **DS**: the doubly smoothed estimate, which additionally kernel-averages
//!   the CD estimates over nearby lattice locations
//!   ([`estimators::ds_smooth`]). Borrowing spatial information lowers both
//!   bias-constant roughness and variance.
//! - **GPA**: grid point approximation. DS (or CD) estimates are precomputed
//!   at a set of value-grid points per pixel ([`estimators::gpa_fit`]); an
//!   arbitrary-value query is then a kernel-weighted average over the grid
//!   ([`estimators::gpa_query`]), with cost independent of the frame count
//!   and lattice size.
//!
//! Around the estimators sit rule-of-thumb bandwidth selection
//! ([`bandwidth`]), the anomaly-region extraction pipeline ([`extract`]),
//! synthetic-data simulation and MSE benchmarking ([`simulate`]),
//! detection-quality metrics ([`eval`]), and file I/O for frames, fitted
//! models, and annotation/detection records ([`io`]).

pub mod bandwidth;
pub mod estimators;
pub mod eval;
pub mod extract;
pub mod io;
pub mod kernel;
pub mod simulate;

mod error;

pub use error::{Error, Result};
