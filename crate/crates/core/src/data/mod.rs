//! Image preprocessing, dataset bookkeeping and the synthetic generator.

pub mod image;
pub mod sample;
pub mod split;
pub mod synth;

pub use image::{resize_square, rotate90, sharpen, to_8bit, Gray16Image, GrayImage};
pub use sample::{
    validate_manifest, validate_partition, Class, Grouped, Manifest, ManifestRecord, Rotation,
    Sample, SplitTag,
};
pub use split::{augment_rotations, group_holdout, group_split, kfold};
pub use synth::synth_generate;
