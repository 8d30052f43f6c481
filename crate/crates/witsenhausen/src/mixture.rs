//! Posterior mean of a finite Gaussian location mixture, `Σ m_j w_j e^{-(y-m_j)²/2σ²} / Σ w_j e^{…}`,
//! evaluated with the max exponent factored out so it never under- or overflows.

use crate::quadrature::symmetric_sum;

/// Returns `None` only when every weight is zero.
pub fn posterior_mean(means: &[f64], weights: &[f64], y: f64, sigma: f64) -> Option<f64> {
    debug_assert_eq!(means.len(), weights.len());
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut emax = f64::NEG_INFINITY;
    let mut expo = Vec::with_capacity(means.len());
    for (&m, &w) in means.iter().zip(weights) {
        let e = if w > 0.0 { -(y - m) * (y - m) * inv } else { f64::NEG_INFINITY };
        emax = emax.max(e);
        expo.push(e);
    }
    if emax == f64::NEG_INFINITY {
        return None;
    }
    let mut num = Vec::with_capacity(means.len());
    let mut den = Vec::with_capacity(means.len());
    for ((&m, &w), &e) in means.iter().zip(weights).zip(&expo) {
        let p = w * (e - emax).exp();
        num.push(p * m);
        den.push(p);
    }
    Some(symmetric_sum(&num) / symmetric_sum(&den))
}

/// `ln Σ w_j e^{-(y-m_j)²/2σ²}`, the log of the unnormalised mixture density.
pub fn log_mixture(means: &[f64], weights: &[f64], y: f64, sigma: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let emax = means
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&m, _)| -(y - m) * (y - m) * inv)
        .fold(f64::NEG_INFINITY, f64::max);
    if emax == f64::NEG_INFINITY {
        return emax;
    }
    let s: f64 = means
        .iter()
        .zip(weights)
        .map(|(&m, &w)| w * (-(y - m) * (y - m) * inv - emax).exp())
        .sum();
    emax + s.ln()
}
