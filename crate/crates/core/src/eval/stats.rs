use alloc::format;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZTest {
    pub z: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Pooled two-proportion z-test comparing `k1/n1` against `k2/n2`.
///
/// `z = (k2/n2 - k1/n1) / sqrt(p (1 - p) (1/n1 + 1/n2))` with the pooled
/// proportion `p = (k1 + k2) / (n1 + n2)`; the two-sided p-value is
/// `erfc(|z| / sqrt 2)`. When the pooled variance is zero both proportions
/// are equal and the result is `z = 0, p = 1`.
pub fn two_proportion_test(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<ZTest> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::Domain("both groups need at least one trial".into()));
    }
    if k1 > n1 || k2 > n2 {
        return Err(Error::Domain(format!(
            "successes exceed trials: {k1}/{n1}, {k2}/{n2}"
        )));
    }
    let (p1, p2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var == 0.0 {
        return Ok(ZTest { z: 0.0, p: 1.0 });
    }
    let z = (p2 - p1) / libm::sqrt(var);
    let p = libm::erfc(libm::fabs(z) / core::f64::consts::SQRT_2);
    Ok(ZTest { z, p })
}
