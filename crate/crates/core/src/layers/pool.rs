use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{expect_shape, spatial_dims};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Max pooling window and stride. Windows that would run past the edge are
/// dropped, so output extents are `floor((n - window) / stride) + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolParams {
    pub window: (usize, usize),
    pub stride: (usize, usize),
}

impl PoolParams {
    pub fn new(window: (usize, usize), stride: (usize, usize)) -> Result<Self> {
        if window.0 == 0 || window.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(Error::Shape(format!(
                "pool window {window:?} and stride {stride:?} must be positive"
            )));
        }
        Ok(Self { window, stride })
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let [h, w, c] = *input else {
            return Err(Error::Shape(format!(
                "pool input must be 3-D, got {input:?}"
            )));
        };
        let (kh, kw) = self.window;
        if h < kh || w < kw {
            return Err(Error::Shape(format!(
                "pool window {kh}x{kw} larger than input {h}x{w}"
            )));
        }
        Ok([
            (h - kh) / self.stride.0 + 1,
            (w - kw) / self.stride.1 + 1,
            c,
        ])
    }
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    input_shape: [usize; 3],
    output_shape: [usize; 3],
    /// Flat input offset of the maximum for each output element.
    argmax: Vec<usize>,
}

impl PoolCache {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

pub fn maxpool_forward<T: Scalar>(
    input: &Tensor<T>,
    p: &PoolParams,
) -> Result<(Tensor<T>, PoolCache)> {
    let (h, w, c) = spatial_dims(input, "pool input")?;
    let out_shape = p.output_shape(input.shape())?;
    let [oh, ow, _] = out_shape;
    let x = input.data();
    let mut out = vec![T::zero(); oh * ow * c];
    let mut argmax = vec![0usize; oh * ow * c];
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                let mut best_at = ((i * p.stride.0) * w + j * p.stride.1) * c + ch;
                let mut best = x[best_at];
                for r in 0..p.window.0 {
                    for s in 0..p.window.1 {
                        let at = ((i * p.stride.0 + r) * w + j * p.stride.1 + s) * c + ch;
                        // strict comparison keeps the first maximum in row-major order
                        if x[at] > best {
                            best = x[at];
                            best_at = at;
                        }
                    }
                }
                let o = (i * ow + j) * c + ch;
                out[o] = best;
                argmax[o] = best_at;
            }
        }
    }
    Ok((
        Tensor::from_vec(&out_shape, out)?,
        PoolCache {
            input_shape: [h, w, c],
            output_shape: out_shape,
            argmax,
        },
    ))
}

/// Routes each output gradient to the position its maximum came from.
pub fn maxpool_backward<T: Scalar>(grad_out: &Tensor<T>, cache: &PoolCache) -> Result<Tensor<T>> {
    expect_shape(grad_out, &cache.output_shape, "pool grad_out")?;
    let mut gi = Tensor::zeros(&cache.input_shape)?;
    let gid = gi.data_mut();
    for (&at, &g) in cache.argmax.iter().zip(grad_out.data()) {
        gid[at] += g;
    }
    Ok(gi)
}
