use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct ReluCache {
    shape: Vec<usize>,
    active: Vec<bool>,
}

/// Elementwise `max(0, x)`.
pub fn relu_forward<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, ReluCache) {
    let mut out = input.clone();
    let mut active = Vec::with_capacity(input.len());
    for v in out.data_mut() {
        let on = *v > T::zero();
        if !on {
            *v = T::zero();
        }
        active.push(on);
    }
    (
        out,
        ReluCache {
            shape: input.shape().to_vec(),
            active,
        },
    )
}

/// Passes the gradient where the input was strictly positive; the
/// derivative at exactly zero is taken as 0.
pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, cache: &ReluCache) -> Result<Tensor<T>> {
    if grad_out.shape() != cache.shape.as_slice() {
        return Err(Error::CacheMismatch(format!(
            "relu grad_out {:?} vs forward {:?}",
            grad_out.shape(),
            cache.shape
        )));
    }
    let mut g = grad_out.clone();
    for (v, &on) in g.data_mut().iter_mut().zip(&cache.active) {
        if !on {
            *v = T::zero();
        }
    }
    Ok(g)
}
