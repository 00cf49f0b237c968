use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::Tensor;

/// Fully connected layer: `weights` is `[out_units, in_units]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let [out, _] = *weights.shape() else {
            return Err(Error::Shape(format!(
                "dense weights must be [out, in], got {:?}",
                weights.shape()
            )));
        };
        if bias.shape() != [out] {
            return Err(Error::Shape(format!(
                "dense bias {:?} does not match {out} units",
                bias.shape()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn in_units(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_units(&self) -> usize {
        self.weights.shape()[0]
    }
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    input: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// `weights . input + bias`. Any input shape with `in_units` elements is
/// accepted and read in row-major order.
pub fn dense_forward<T: Scalar>(
    input: &Tensor<T>,
    p: &DenseParams<T>,
) -> Result<(Tensor<T>, DenseCache<T>)> {
    let n = p.in_units();
    if input.len() != n {
        return Err(Error::Shape(format!(
            "dense layer expects {n} inputs, got {}",
            input.len()
        )));
    }
    let x = input.data();
    let out: Vec<T> = p
        .weights
        .data()
        .chunks_exact(n)
        .zip(p.bias.data())
        .map(|(row, &b)| dot(row, x) + b)
        .collect();
    Ok((
        Tensor::from_vec(&[p.out_units()], out)?,
        DenseCache {
            input: input.clone(),
        },
    ))
}

/// The input gradient comes back in the shape the forward input had.
pub fn dense_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &DenseCache<T>,
    p: &DenseParams<T>,
) -> Result<DenseGrads<T>> {
    if grad_out.shape() != [p.out_units()] || cache.input.len() != p.in_units() {
        return Err(Error::CacheMismatch(format!(
            "dense grad_out {:?} / cached input of {} elements vs layer {}x{}",
            grad_out.shape(),
            cache.input.len(),
            p.out_units(),
            p.in_units()
        )));
    }
    let n = p.in_units();
    let x = cache.input.data();
    let mut gw = Tensor::zeros_like(&p.weights);
    let mut gi = Tensor::zeros_like(&cache.input);
    for ((o, &g), row) in grad_out
        .data()
        .iter()
        .enumerate()
        .zip(p.weights.data().chunks_exact(n))
    {
        if g == T::zero() {
            continue;
        }
        axpy(g, x, &mut gw.data_mut()[o * n..(o + 1) * n]);
        axpy(g, row, gi.data_mut());
    }
    Ok(DenseGrads {
        input: gi,
        weights: gw,
        bias: grad_out.clone(),
    })
}
