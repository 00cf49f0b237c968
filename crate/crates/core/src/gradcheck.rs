//! Central-difference gradient oracle used to validate every backward pass.

use alloc::format;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Estimates the gradient of `f` at `x` elementwise as
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)`.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor<f64>, eps: f64) -> Result<Tensor<f64>>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let mut probe = x.clone();
    let mut grad = Tensor::zeros_like(x);
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("objective near element {i}")));
        }
        grad.data_mut()[i] = (plus - minus) / (2.0 * eps);
    }
    Ok(grad)
}

/// Normwise relative error `|a - b|_2 / max(|a|_2, |b|_2)`; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &[f64]| libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let diff = libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>());
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn linear_function() {
        let x = Tensor::from_vec(&[4], vec![0.3, -1.0, 2.5, 7.0]).unwrap();
        let g = finite_diff_grad(|t| t.sum(), &x, 1e-5).unwrap();
        for v in g.data() {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn square_function() {
        let x = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let g = finite_diff_grad(|t| t.data().iter().map(|v| v * v).sum(), &x, 1e-5).unwrap();
        assert!((g.data()[0] - 2.0).abs() < 1e-6);
        assert!((g.data()[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function() {
        let x = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let g = finite_diff_grad(|_| 3.25, &x, 1e-5).unwrap();
        assert!(g.data().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn quadratic_polynomials_match_analytic() {
        // f(x) = sum_i a_i x_i^2 + b_i x_i + c x_0 x_1
        let mut rng = crate::rng::Prng::new(5);
        for _ in 0..20 {
            let n = 5;
            let a: alloc::vec::Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0).unwrap()).collect();
            let b: alloc::vec::Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0).unwrap()).collect();
            let c = rng.uniform(-1.0, 1.0).unwrap();
            let x = Tensor::from_vec(
                &[n],
                (0..n).map(|_| rng.uniform(-3.0, 3.0).unwrap()).collect(),
            )
            .unwrap();
            let f = |t: &Tensor<f64>| {
                let d = t.data();
                d.iter()
                    .enumerate()
                    .map(|(i, v)| a[i] * v * v + b[i] * v)
                    .sum::<f64>()
                    + c * d[0] * d[1]
            };
            let num = finite_diff_grad(f, &x, 1e-5).unwrap();
            let d = x.data();
            let mut analytic: alloc::vec::Vec<f64> =
                (0..n).map(|i| 2.0 * a[i] * d[i] + b[i]).collect();
            analytic[0] += c * d[1];
            analytic[1] += c * d[0];
            assert!(relative_error(num.data(), &analytic) < 1e-6);
        }
    }

    #[test]
    fn non_finite_objective() {
        let x = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        assert!(matches!(
            finite_diff_grad(|_| f64::NAN, &x, 1e-5),
            Err(Error::NonFinite(_))
        ));
    }
}
