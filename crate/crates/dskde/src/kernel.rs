//! Gaussian kernel functions on the value and spatial domains, together with
//! the kernel moment constants used by the bandwidth rules.
//!
//! The same standard Gaussian kernel is used for all three smoothing layers:
//! value-domain CD estimation, spatial DS smoothing (as the product kernel
//! `K(d1) * K(d2)`), and the value-domain GPA query weights.

use std::f64::consts::PI;

/// Standard Gaussian kernel `K(t) = (2*pi)^(-1/2) * exp(-t^2 / 2)`.
#[inline(always)]
pub fn gauss_kernel(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// Two-dimensional product kernel `K(d1) * K(d2)` used for spatial smoothing.
#[inline(always)]
pub fn product_kernel(d1: f64, d2: f64) -> f64 {
    gauss_kernel(d1) * gauss_kernel(d2)
}

/// Kernel moments `mu_m = int t^m K(t) dt` and `nu_m = int t^m K^2(t) dt`
/// for orders `m <= 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    mu: [f64; 4],
    nu: [f64; 4],
}

impl KernelMoments {
    /// Moment `mu_m`. Panics if `m > 3`.
    pub fn mu(&self, m: usize) -> f64 {
        self.mu[m]
    }

    /// Moment `nu_m`. Panics if `m > 3`.
    pub fn nu(&self, m: usize) -> f64 {
        self.nu[m]
    }
}

/// Analytic moments of the standard Gaussian kernel.
///
/// `mu = [1, 0, 1, 0]` and `nu_0 = 1/(2*sqrt(pi))`, `nu_2 = 1/(4*sqrt(pi))`,
/// with the odd `nu` moments vanishing by symmetry. Hard-coded so callers pay
/// no quadrature cost; the quadrature cross-check lives in the tests.
pub fn kernel_moments() -> KernelMoments {
    let sqrt_pi = PI.sqrt();
    KernelMoments {
        mu: [1.0, 0.0, 1.0, 0.0],
        nu: [1.0 / (2.0 * sqrt_pi), 0.0, 1.0 / (4.0 * sqrt_pi), 0.0],
    }
}
