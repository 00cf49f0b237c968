//! File formats, dataset loading and the command-line front end for
//! [`mtcnn_core`].
//!
//! On-disk formats:
//!
//! * images: binary portable graymap (`P5`), 8 or 16 bits per pixel
//! * manifests: tab-separated `path  label  group_id  split`
//! * models: the `MTCN` container written by [`model_io`]
//! * rater sheets: tab-separated `sample_id  task  rater_id  label`

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod manifest_io;
pub mod model_io;
pub mod pgm;
pub mod raters;

pub use error::{Error, Result};
