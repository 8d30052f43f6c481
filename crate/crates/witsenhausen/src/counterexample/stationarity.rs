use super::{Prior, ProblemParams, StrategyPair};
use crate::error::{numeric, Result};
use crate::mixture::posterior_mean;
use crate::quadrature::QuadratureRule;

/// `ln Λ(x₀, y₁) = (y₁² − (y₁ − γ̄₁(x₀))²) / 2σ²`.
pub fn log_rnd_density<G: Fn(f64) -> f64>(params: &ProblemParams, gamma1bar: G, x0: f64, y1: f64) -> f64 {
    let g = gamma1bar(x0);
    // y² − (y − g)² = g(2y − g)
    g * (2.0 * y1 - g) / (2.0 * params.sigma * params.sigma)
}

/// Density of `y₁` under the controlled measure relative to `N(0, σ²)`.
/// Saturates at `f64::MAX` rather than overflowing.
pub fn rnd_density<G: Fn(f64) -> f64>(params: &ProblemParams, gamma1bar: G, x0: f64, y1: f64) -> f64 {
    let l = log_rnd_density(params, gamma1bar, x0, y1);
    if l >= f64::MAX.ln() {
        f64::MAX
    } else {
        l.exp()
    }
}

#[derive(Debug, Clone)]
pub struct Stationarity {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

impl Stationarity {
    pub fn max_r1(&self) -> f64 {
        self.r1.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn max_r2(&self) -> f64 {
        self.r2.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Residuals of the two person-by-person optimality conditions:
///
/// * `r1(x₀) = γ̄₁ − x₀ + E{γ̄₁ − γ₂ | x₀}/k² + E{(y₁ − γ̄₁)(γ̄₁ − γ₂)² | x₀}/(2k²σ²)`
/// * `r2(y₁) = γ₂(y₁) − E{γ̄₁(x₀) | y₁}`
///
/// Conditional expectations over `v` and over the prior both use `rule`.
pub fn stationarity_residual(
    params: &ProblemParams,
    pair: &StrategyPair,
    rule: &QuadratureRule,
    x0_grid: &[f64],
    y1_grid: &[f64],
) -> Result<Stationarity> {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let vs = std::f64::consts::SQRT_2 * params.sigma;
    let k2 = params.k2();
    let s2 = params.sigma * params.sigma;

    let r1 = x0_grid
        .iter()
        .map(|&x0| {
            let g = pair.gamma1bar(x0);
            let (mut e1, mut e2) = (0.0, 0.0);
            for (z, w) in rule.iter() {
                let v = vs * z;
                let d = g - pair.gamma2(g + v);
                e1 += w * d;
                e2 += w * v * d * d;
            }
            let r = g - x0 + e1 / (sqrt_pi * k2) + e2 / (sqrt_pi * 2.0 * k2 * s2);
            if r.is_finite() {
                Ok(r)
            } else {
                Err(numeric(format!("r1 not finite at x0 = {x0:e}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let (means, weights): (Vec<f64>, Vec<f64>) = match params.prior {
        Prior::Gaussian => {
            let xs = std::f64::consts::SQRT_2 * params.sigma_x;
            rule.iter().map(|(z, w)| (pair.gamma1bar(xs * z), w)).unzip()
        }
        Prior::TwoPoint => (
            vec![pair.gamma1bar(-params.sigma_x), pair.gamma1bar(params.sigma_x)],
            vec![0.5, 0.5],
        ),
    };
    let r2 = y1_grid
        .iter()
        .map(|&y| {
            posterior_mean(&means, &weights, y, params.sigma)
                .map(|m| pair.gamma2(y) - m)
                .ok_or_else(|| numeric(format!("empty mixture at y1 = {y:e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Stationarity { r1, r2 })
}
