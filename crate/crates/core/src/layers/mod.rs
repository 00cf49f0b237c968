//! Forward and backward passes for the network's layer types.
//!
//! Spatial tensors are laid out `[height, width, channels]`. Each forward
//! returns a cache that only the matching backward call accepts; backward
//! passes compute exact gradients of `sum(grad_out * output)`.

mod activation;
mod conv;
mod dense;
mod dropout;
mod loss;
mod pool;

pub use activation::{relu_backward, relu_forward, ReluCache};
pub(crate) use conv::conv2d_backward_impl as conv_backward_partial;
pub use conv::{conv2d_backward, conv2d_forward, ConvCache, ConvGrads, ConvParams};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseGrads, DenseParams};
pub use dropout::{dropout_backward, dropout_forward, DropoutCache, DropoutMode};
pub use loss::{softmax, softmax_xent, SoftmaxXent};
pub use pool::{maxpool_backward, maxpool_forward, PoolCache, PoolParams};

use alloc::format;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn spatial_dims<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref other => Err(Error::Shape(format!(
            "{what} must be [height, width, channels], got {other:?}"
        ))),
    }
}

fn expect_shape<T: Scalar>(t: &Tensor<T>, shape: &[usize], what: &str) -> Result<()> {
    if t.shape() != shape {
        return Err(Error::CacheMismatch(format!(
            "{what} has shape {:?}, forward produced {shape:?}",
            t.shape()
        )));
    }
    Ok(())
}
