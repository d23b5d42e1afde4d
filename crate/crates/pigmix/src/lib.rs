//! File formats, training and table tooling, CLI and HTTP service for the
//! pigment mixture pipeline. The numerics live in `pigmix-core`.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod lut_file;
pub mod model_file;
pub mod report;
pub mod service;
pub mod spectra_csv;
pub mod wire;

pub use error::{exit, AppError, AppResult};
