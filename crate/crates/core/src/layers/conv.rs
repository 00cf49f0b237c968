use alloc::format;
use alloc::vec;

use super::{expect_shape, spatial_dims};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::Tensor;

/// Weights of a valid (unpadded) 2-D convolution.
///
/// The kernel is `[filters, kernel_h, kernel_w, in_channels]`. The operation is
/// cross-correlation: the kernel is not flipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: (usize, usize),
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(kernel: Tensor<T>, bias: Tensor<T>, stride: (usize, usize)) -> Result<Self> {
        if kernel.shape().len() != 4 {
            return Err(Error::Shape(format!(
                "conv kernel must be [filters, kh, kw, channels], got {:?}",
                kernel.shape()
            )));
        }
        if bias.shape() != [kernel.shape()[0]] {
            return Err(Error::Shape(format!(
                "conv bias {:?} does not match {} filters",
                bias.shape(),
                kernel.shape()[0]
            )));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(Error::Shape("conv stride must be positive".into()));
        }
        Ok(Self {
            kernel,
            bias,
            stride,
        })
    }

    pub fn filters(&self) -> usize {
        self.kernel.shape()[0]
    }

    fn dims(&self) -> (usize, usize, usize, usize) {
        let s = self.kernel.shape();
        (s[0], s[1], s[2], s[3])
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let (f, kh, kw, kc) = self.dims();
        let [h, w, c] = *input else {
            return Err(Error::Shape(format!(
                "conv input must be 3-D, got {input:?}"
            )));
        };
        if c != kc {
            return Err(Error::Shape(format!(
                "conv input has {c} channels, kernel expects {kc}"
            )));
        }
        if h < kh || w < kw {
            return Err(Error::Shape(format!(
                "conv kernel {kh}x{kw} larger than input {h}x{w}"
            )));
        }
        Ok([
            (h - kh) / self.stride.0 + 1,
            (w - kw) / self.stride.1 + 1,
            f,
        ])
    }
}

#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    input: Tensor<T>,
    output_shape: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Copies the `kh x kw x c` patch with top-left corner `(row, col)` into `patch`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn gather<T: Scalar>(
    input: &[T],
    w: usize,
    c: usize,
    kh: usize,
    kw: usize,
    row: usize,
    col: usize,
    patch: &mut [T],
) {
    let seg = kw * c;
    for r in 0..kh {
        let start = ((row + r) * w + col) * c;
        patch[r * seg..(r + 1) * seg].copy_from_slice(&input[start..start + seg]);
    }
}

pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    p: &ConvParams<T>,
) -> Result<(Tensor<T>, ConvCache<T>)> {
    let (_, w, c) = spatial_dims(input, "conv input")?;
    let out_shape = p.output_shape(input.shape())?;
    let [oh, ow, f] = out_shape;
    let (_, kh, kw, _) = p.dims();
    let patch_len = kh * kw * c;
    let x = input.data();
    let kernel = p.kernel.data();
    let bias = p.bias.data();
    let mut out = vec![T::zero(); oh * ow * f];
    let mut patch = vec![T::zero(); patch_len];
    for i in 0..oh {
        for j in 0..ow {
            gather(x, w, c, kh, kw, i * p.stride.0, j * p.stride.1, &mut patch);
            let o = &mut out[(i * ow + j) * f..(i * ow + j + 1) * f];
            for (fi, slot) in o.iter_mut().enumerate() {
                *slot = dot(&patch, &kernel[fi * patch_len..(fi + 1) * patch_len]) + bias[fi];
            }
        }
    }
    let output = Tensor::from_vec(&out_shape, out)?;
    Ok((
        output,
        ConvCache {
            input: input.clone(),
            output_shape: out_shape,
        },
    ))
}

/// Gradients of a convolution. `input` in the result is `None` only when
/// `need_input` is false (the first layer of a network has no use for it).
pub(crate) fn conv2d_backward_impl<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &ConvCache<T>,
    p: &ConvParams<T>,
    need_input: bool,
) -> Result<ConvGrads<T>> {
    expect_shape(grad_out, &cache.output_shape, "conv grad_out")?;
    let expected = p
        .output_shape(cache.input.shape())
        .map_err(|e| Error::CacheMismatch(format!("{e}")))?;
    if expected != cache.output_shape {
        return Err(Error::CacheMismatch(
            "conv params changed since forward".into(),
        ));
    }
    let (_, w, c) = spatial_dims(&cache.input, "conv input")?;
    let [oh, ow, f] = cache.output_shape;
    let (_, kh, kw, _) = p.dims();
    let patch_len = kh * kw * c;
    let seg = kw * c;
    let x = cache.input.data();
    let kernel = p.kernel.data();
    let g = grad_out.data();

    let mut gk = Tensor::zeros_like(&p.kernel);
    let mut gb = Tensor::zeros_like(&p.bias);
    let mut gi = need_input.then(|| Tensor::zeros_like(&cache.input));
    let mut patch = vec![T::zero(); patch_len];
    let mut gpatch = vec![T::zero(); patch_len];
    for i in 0..oh {
        for j in 0..ow {
            let go = &g[(i * ow + j) * f..(i * ow + j + 1) * f];
            if go.iter().all(|v| *v == T::zero()) {
                continue;
            }
            let (row, col) = (i * p.stride.0, j * p.stride.1);
            gather(x, w, c, kh, kw, row, col, &mut patch);
            gpatch.iter_mut().for_each(|v| *v = T::zero());
            for (fi, &gv) in go.iter().enumerate() {
                if gv == T::zero() {
                    continue;
                }
                gb.data_mut()[fi] += gv;
                axpy(
                    gv,
                    &patch,
                    &mut gk.data_mut()[fi * patch_len..(fi + 1) * patch_len],
                );
                if gi.is_some() {
                    axpy(
                        gv,
                        &kernel[fi * patch_len..(fi + 1) * patch_len],
                        &mut gpatch,
                    );
                }
            }
            if let Some(gi) = gi.as_mut() {
                let gid = gi.data_mut();
                for r in 0..kh {
                    let start = ((row + r) * w + col) * c;
                    for (dst, src) in gid[start..start + seg]
                        .iter_mut()
                        .zip(&gpatch[r * seg..(r + 1) * seg])
                    {
                        *dst += *src;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: gi,
        kernel: gk,
        bias: gb,
    })
}

/// Returns `(grad_input, grad_kernel, grad_bias)`.
pub fn conv2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &ConvCache<T>,
    p: &ConvParams<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let g = conv2d_backward_impl(grad_out, cache, p, true)?;
    Ok((g.input.expect("input gradient requested"), g.kernel, g.bias))
}
