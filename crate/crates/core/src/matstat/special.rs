use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{EasError, Result};

/// Log of the multivariate gamma function,
/// `log Γ_q(a) = q(q-1)/4 · log π + Σ_{i=1..q} log Γ(a - (i-1)/2)`.
///
/// Defined for `a > (q - 1) / 2`.
pub fn log_multivariate_gamma(q: usize, a: f64) -> Result<f64> {
    if q == 0 {
        return Err(EasError::Domain("multivariate gamma needs q >= 1".into()));
    }
    let lower = (q as f64 - 1.0) / 2.0;
    if !(a > lower) {
        return Err(EasError::Domain(format!(
            "log multivariate gamma needs a > {lower}, got {a}"
        )));
    }
    let qf = q as f64;
    let mut acc = qf * (qf - 1.0) / 4.0 * PI.ln();
    for i in 0..q {
        acc += ln_gamma(a - i as f64 / 2.0);
    }
    Ok(acc)
}
