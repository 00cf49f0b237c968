//! Turning labelled images into network inputs.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{resize_square, sharpen, GrayImage, Sample};
use crate::error::{Error, Result};
use crate::eval::TaskSpec;
use crate::tensor::Tensor;

/// A network input with its target index within a task.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T = f32> {
    pub input: Tensor<T>,
    pub target: usize,
}

/// Sharpens (unless already done) at source resolution, then pads and
/// resizes to `input_size`.
pub fn prepare_image(sample: &Sample, input_size: usize, sharpened: bool) -> Result<GrayImage> {
    let img = if sharpened && !sample.sharpened {
        sharpen(&sample.image)?
    } else {
        sample.image.clone()
    };
    resize_square(&img, input_size)
}

/// Examples for the samples whose class belongs to `task`, in input order.
pub fn examples_for(
    samples: &[Sample],
    task: TaskSpec,
    input_size: usize,
    sharpened: bool,
) -> Result<Vec<Example<f32>>> {
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let Some(target) = task.index_of(s.label) else {
            continue;
        };
        let img = prepare_image(s, input_size, sharpened)?;
        out.push(Example {
            input: img.to_tensor(),
            target,
        });
    }
    Ok(out)
}

/// Samples restricted to the classes of `task`.
pub fn filter_task(samples: &[Sample], task: TaskSpec) -> Vec<Sample> {
    samples
        .iter()
        .filter(|s| task.index_of(s.label).is_some())
        .cloned()
        .collect()
}

pub(crate) fn require_nonempty<T>(items: &[T], what: &str) -> Result<()> {
    if items.is_empty() {
        return Err(Error::Config(format!("{what} is empty")));
    }
    Ok(())
}
