//! NAdam updates and the L2 weight penalty.
//!
//! The update uses the plain NAdam formulation without a momentum warm-up
//! schedule. With `m̂ = m / (1 - β1^t)` and `n̂ = n / (1 - β2^t)`:
//!
//! ```text
//! θ ← θ - lr · (β1 · m̂ + (1 - β1) · g / (1 - β1^t)) / (√n̂ + ε)
//! ```

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NadamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment accumulators for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NadamState<T> {
    pub m: Tensor<T>,
    pub n: Tensor<T>,
}

impl<T: Scalar> NadamState<T> {
    pub fn for_param(param: &Tensor<T>) -> Self {
        Self {
            m: Tensor::zeros_like(param),
            n: Tensor::zeros_like(param),
        }
    }
}

/// Applies one NAdam update to a single tensor at step `t` (1-based).
pub fn nadam_step<T: Scalar>(
    params: &mut Tensor<T>,
    grads: &Tensor<T>,
    state: &mut NadamState<T>,
    cfg: &NadamConfig,
    t: u64,
) -> Result<()> {
    if params.shape() != grads.shape() || state.m.shape() != params.shape() {
        return Err(Error::Shape(alloc::format!(
            "nadam: params {:?}, grads {:?}, state {:?}",
            params.shape(),
            grads.shape(),
            state.m.shape()
        )));
    }
    let t = t.max(1) as i32;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    let (b1, b2) = (T::from_f64(cfg.beta1), T::from_f64(cfg.beta2));
    let (one_b1, one_b2) = (T::from_f64(1.0 - cfg.beta1), T::from_f64(1.0 - cfg.beta2));
    let (bc1, bc2) = (T::from_f64(bc1), T::from_f64(bc2));
    let lr = T::from_f64(cfg.lr);
    let eps = T::from_f64(cfg.epsilon);
    let m = state.m.data_mut();
    let n = state.n.data_mut();
    for (((p, &g), m), n) in params.data_mut().iter_mut().zip(grads.data()).zip(m).zip(n) {
        *m = b1 * *m + one_b1 * g;
        *n = b2 * *n + one_b2 * g * g;
        let m_hat = *m / bc1;
        let n_hat = *n / bc2;
        *p -= lr * (b1 * m_hat + one_b1 * g / bc1) / (n_hat.sqrt() + eps);
    }
    Ok(())
}

/// NAdam over an ordered list of parameter tensors sharing one step counter.
#[derive(Debug, Clone)]
pub struct Nadam<T> {
    pub config: NadamConfig,
    t: u64,
    states: Vec<NadamState<T>>,
}

impl<T: Scalar> Nadam<T> {
    pub fn new<'a, I>(config: NadamConfig, params: I) -> Self
    where
        I: IntoIterator<Item = &'a Tensor<T>>,
    {
        Self {
            config,
            t: 0,
            states: params.into_iter().map(NadamState::for_param).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn states(&self) -> &[NadamState<T>] {
        &self.states
    }

    /// One optimizer step over all tensors. Every gradient is checked for
    /// finiteness before anything is modified; a bad tensor aborts the whole
    /// step and is named in the error.
    pub fn step(
        &mut self,
        params: &mut [(String, &mut Tensor<T>)],
        grads: &[Tensor<T>],
    ) -> Result<()> {
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(Error::Shape(alloc::format!(
                "nadam tracks {} tensors, got {} params and {} grads",
                self.states.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((name, _), g) in params.iter().zip(grads) {
            if !g.all_finite() {
                return Err(Error::NonFinite(alloc::format!("gradient of {name}")));
            }
        }
        self.t += 1;
        for (((_, p), g), s) in params.iter_mut().zip(grads).zip(&mut self.states) {
            nadam_step(p, g, s, &self.config, self.t)?;
        }
        Ok(())
    }
}

/// Penalty `lambda · Σw²` and its gradient `2 · lambda · w`. Applied to
/// weight tensors only; biases are never regularized.
pub fn l2_apply<T: Scalar>(weights: &Tensor<T>, lambda: f64) -> (f64, Tensor<T>) {
    let penalty = lambda
        * weights
            .data()
            .iter()
            .map(|w| w.as_f64() * w.as_f64())
            .sum::<f64>();
    let mut grad = weights.clone();
    grad.scale(T::from_f64(2.0 * lambda));
    (penalty, grad)
}

/// Adds the L2 gradient into `grad` in place and returns the penalty.
pub fn l2_accumulate<T: Scalar>(weights: &Tensor<T>, lambda: f64, grad: &mut Tensor<T>) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let two_l = T::from_f64(2.0 * lambda);
    let mut sq = 0.0;
    for (g, &w) in grad.data_mut().iter_mut().zip(weights.data()) {
        *g += two_l * w;
        sq += w.as_f64() * w.as_f64();
    }
    lambda * sq
}
