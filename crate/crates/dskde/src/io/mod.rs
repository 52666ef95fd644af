//! File formats: 8-bit binary PGM frames, the fitted-model container, and
//! the line-oriented annotation/detection records.

pub mod model;
pub mod pgm;
pub mod text;

pub use model::{load_model, save_model};
pub use pgm::{load_frames, read_pgm, write_pgm};
pub use text::{
    load_annotations, load_detections, parse_key_values, write_detections,
};
