use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Per-element multipliers applied in the forward pass: 0 for dropped
/// elements, `1 / (1 - rate)` for survivors, 1 everywhere at inference.
#[derive(Debug, Clone)]
pub struct DropoutCache<T> {
    shape: Vec<usize>,
    mask: Vec<T>,
}

impl<T: Scalar> DropoutCache<T> {
    pub fn mask(&self) -> &[T] {
        &self.mask
    }
}

/// Inverted dropout. Inference is the identity.
pub fn dropout_forward<T: Scalar>(
    input: &Tensor<T>,
    rate: f64,
    mode: DropoutMode,
    rng: &mut Prng,
) -> Result<(Tensor<T>, DropoutCache<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    let mask: Vec<T> = match mode {
        DropoutMode::Train if rate > 0.0 => {
            let keep = T::from_f64(1.0 / (1.0 - rate));
            (0..input.len())
                .map(|_| if rng.bernoulli(rate) { T::zero() } else { keep })
                .collect()
        }
        _ => alloc::vec![T::one(); input.len()],
    };
    let mut out = input.clone();
    for (v, m) in out.data_mut().iter_mut().zip(&mask) {
        *v *= *m;
    }
    Ok((
        out,
        DropoutCache {
            shape: input.shape().to_vec(),
            mask,
        },
    ))
}

pub fn dropout_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &DropoutCache<T>,
) -> Result<Tensor<T>> {
    if grad_out.shape() != cache.shape.as_slice() {
        return Err(Error::CacheMismatch(format!(
            "dropout grad_out {:?} vs forward {:?}",
            grad_out.shape(),
            cache.shape
        )));
    }
    let mut g = grad_out.clone();
    for (v, m) in g.data_mut().iter_mut().zip(&cache.mask) {
        *v *= *m;
    }
    Ok(g)
}
