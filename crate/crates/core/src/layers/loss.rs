use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct SoftmaxXent<T> {
    pub loss: T,
    pub grad_logits: Tensor<T>,
    pub probs: Tensor<T>,
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let probs = exps.into_iter().map(|e| e / total).collect();
    Tensor::from_vec(logits.shape(), probs).expect("same shape")
}

/// Softmax followed by categorical cross-entropy against `true_class`.
///
/// The loss is computed as `logsumexp(z) - z[true_class]`, which stays finite
/// even when the true class probability underflows.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, true_class: usize) -> Result<SoftmaxXent<T>> {
    let k = logits.len();
    if true_class >= k {
        return Err(Error::Label {
            class: true_class,
            classes: k,
        });
    }
    let z = logits.data();
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let sum_exp: T = z.iter().map(|&v| (v - max).exp()).sum();
    let loss = max + sum_exp.ln() - z[true_class];
    let probs = softmax(logits);
    let mut grad = probs.clone();
    grad.data_mut()[true_class] -= T::one();
    Ok(SoftmaxXent {
        loss,
        grad_logits: grad,
        probs,
    })
}
