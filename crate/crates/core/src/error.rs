use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid shape {0:?}: every extent must be at least 1")]
    InvalidShape(Vec<usize>),
    #[error("invalid range: lo ({lo}) must be below hi ({hi})")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("layer cache does not match this backward call: {0}")]
    CacheMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidRate(f64),
    #[error("class index {class} out of range for {classes} classes")]
    Label { class: usize, classes: usize },
    #[error("number of classes must be 2 or 3, got {0}")]
    InvalidClasses(usize),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("image too small: {0}")]
    ImageSize(String),
    #[error("sample {0} is already rotated; rotation augmentation applies to originals only")]
    DoubleAugmentation(String),
    #[error("cannot stratify: {0}")]
    Stratification(String),
    #[error("cannot build folds: {0}")]
    Fold(String),
    #[error("manifest invariant violated: {0}")]
    Leakage(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("topology search failed: {0}")]
    Search(String),
    #[error("task mismatch: {0}")]
    Task(String),
    #[error("accuracy of an empty confusion matrix is undefined")]
    EmptyMatrix,
    #[error("rater sheets: {0}")]
    Sheet(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
}
