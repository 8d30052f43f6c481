//! Gauss–Hermite collocation of the two optimality equations.
//!
//! With `x₀ₗ = √2 σ_x z_l` and unknowns `s_l = γ̄₁(x₀ₗ)`, the second-stage law
//! becomes the finite Bayes ratio over the levels, and the first-stage equation
//! at each collocation point gives one residual component. The solved levels
//! then define γ̄₁ everywhere through a scalar equation in `γ̄₁(x₀)` alone.

mod pair;

use serde::{Deserialize, Serialize};

use crate::counterexample::{affine_optimal, payoff_quadrature, Prior, ProblemParams, StrategyPair};
use crate::error::{config, precondition, Result};
use crate::lsq::{levenberg_marquardt, LsqOptions};
use crate::mixture::posterior_mean;
use crate::quadrature::{build_hermite_rule, symmetric_sum, QuadratureRule};

pub use pair::{CollocationPair, RootPolicy};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_ITER: usize = 500;
pub const DEFAULT_QUANTIZER_SCALE: f64 = 1.0;
/// The learned γ₂ is steep near the bin edges; lower inner orders bias the cost.
pub const SELECTION_INNER_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalingLevels {
    pub values: Vec<f64>,
    pub rule_order: usize,
    pub params: ProblemParams,
}

impl SignalingLevels {
    pub fn new(values: Vec<f64>, params: ProblemParams) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(config("signaling levels must be a non-empty list of finite numbers"));
        }
        Ok(Self { rule_order: values.len(), values, params })
    }
}

/// `x₀ₗ = √2 σ_x z_l`.
pub fn collocation_points(params: &ProblemParams, rule: &QuadratureRule) -> Vec<f64> {
    let c = std::f64::consts::SQRT_2 * params.sigma_x;
    rule.nodes().iter().map(|z| c * z).collect()
}

/// Bayes ratio `Σ s_i w_i(y) λ_i / Σ w_i(y) λ_i`, `w_i(y) = exp(−(y − s_i)²/2σ²)`.
pub fn gamma2_from_levels(y1: f64, values: &[f64], rule: &QuadratureRule, sigma: f64) -> f64 {
    posterior_mean(values, rule.weights(), y1, sigma).expect("Gauss–Hermite weights are positive")
}

pub fn eval_gamma2(y1: f64, levels: &SignalingLevels, rule: &QuadratureRule) -> f64 {
    gamma2_from_levels(y1, &levels.values, rule, levels.params.sigma)
}

/// The `1/k²` term of the first-stage equation at `γ̄₁(x₀) = u`, with γ₂ from `values`:
/// `h(u) = (1/√π k²) Σ λ_i [z_i/(√2σ)·d_i² + d_i]`, `d_i = u − γ₂(√2σ z_i + u)`.
///
/// `h` does not involve `x₀`, so `γ̄₁(x₀)` solves `u + h(u) = x₀`.
pub fn correction(u: f64, values: &[f64], params: &ProblemParams, rule: &QuadratureRule) -> f64 {
    let vs = std::f64::consts::SQRT_2 * params.sigma;
    let inv_vs = 1.0 / vs;
    let mut terms = [0.0; crate::quadrature::MAX_ORDER];
    let n = rule.order();
    for (i, (z, w)) in rule.iter().enumerate() {
        let d = u - gamma2_from_levels(vs * z + u, values, rule, params.sigma);
        terms[i] = w * (z * inv_vs * d * d + d);
    }
    symmetric_sum(&terms[..n]) * (1.0 / (std::f64::consts::PI.sqrt() * params.k2()))
}

/// Residual vector for raw level values; component `l` is `s_l − x₀ₗ + h(s_l)`.
pub fn residual_vector(values: &[f64], params: &ProblemParams, rule: &QuadratureRule) -> Vec<f64> {
    let x0 = collocation_points(params, rule);
    values
        .iter()
        .zip(&x0)
        .map(|(&t, &x)| t - x + correction(t, values, params, rule))
        .collect()
}

pub fn residual_system(levels: &SignalingLevels, rule: &QuadratureRule) -> Result<Vec<f64>> {
    if levels.values.len() != rule.order() {
        return Err(precondition(format!(
            "{} levels but rule order {}",
            levels.values.len(),
            rule.order()
        )));
    }
    Ok(residual_vector(&levels.values, &levels.params, rule))
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitTag {
    /// `s_l = λ_aff x₀ₗ`
    Affine,
    /// Levels on an evenly spaced odd lattice whose outer bin is `scale · max x₀ₗ`.
    Quantizer { scale: f64 },
    User { values: Vec<f64> },
    /// Affine and quantizer starts; the converged one with lower cost wins.
    Auto,
}

impl InitTag {
    pub fn quantizer() -> Self {
        Self::Quantizer { scale: DEFAULT_QUANTIZER_SCALE }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Affine => "affine".into(),
            Self::Quantizer { .. } => "quantizer".into(),
            Self::User { .. } => "user".into(),
            Self::Auto => "auto".into(),
        }
    }
}

pub fn initial_levels(init: &InitTag, params: &ProblemParams, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let x0 = collocation_points(params, rule);
    let n = x0.len();
    match init {
        InitTag::Affine => {
            let lambda = match affine_optimal(params)? {
                StrategyPair::Affine { lambda, .. } => lambda,
                _ => unreachable!(),
            };
            Ok(x0.iter().map(|x| lambda * x).collect())
        }
        InitTag::Quantizer { scale } => {
            if !(scale.is_finite() && *scale > 0.0) {
                return Err(config(format!("quantizer scale must be positive, got {scale}")));
            }
            let outer = scale * x0[n - 1];
            if n == 1 {
                return Ok(vec![0.0]);
            }
            // odd n: bins jΔ, j = −m..m; even n: bins (j − ½)Δ
            let m = (n / 2) as f64;
            let (delta, offset) = if n % 2 == 1 { (outer / m, 0.0) } else { (outer / (m - 0.5), 0.5) };
            Ok(x0
                .iter()
                .map(|x| {
                    let q = (scale * x / delta + offset).round() - offset;
                    // exact odd symmetry: round half away from zero is odd already
                    q * delta
                })
                .collect())
        }
        InitTag::User { values } => {
            if values.len() != n {
                return Err(config(format!("user init has {} values, rule order is {n}", values.len())));
            }
            Ok(values.clone())
        }
        InitTag::Auto => Err(config("auto is a multi-start policy, not a single start")),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub levels: SignalingLevels,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub init: InitTag,
    pub tol: f64,
}

fn solve_from(params: &ProblemParams, rule: &QuadratureRule, init: InitTag, tol: f64) -> Result<SolveReport> {
    let start = initial_levels(&init, params, rule)?;
    let out = levenberg_marquardt(
        |t| residual_vector(t, params, rule),
        &start,
        LsqOptions { tol, max_iter: MAX_ITER, fd_rel: 1e-6 },
    );
    Ok(SolveReport {
        levels: SignalingLevels::new(out.x, *params)?,
        residual_norm: out.residual_norm,
        iterations: out.iterations,
        converged: out.converged,
        init,
        tol,
    })
}

pub fn solve_signaling_levels(
    params: &ProblemParams,
    rule: &QuadratureRule,
    init: InitTag,
    tol: f64,
) -> Result<SolveReport> {
    if params.prior != Prior::Gaussian {
        return Err(precondition("collocation at Gauss–Hermite points needs the Gaussian prior"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(precondition(format!("tolerance must be positive, got {tol}")));
    }
    if init != InitTag::Auto {
        return solve_from(params, rule, init, tol);
    }
    let reports = [
        solve_from(params, rule, InitTag::Affine, tol)?,
        solve_from(params, rule, InitTag::quantizer(), tol)?,
    ];
    let converged: Vec<&SolveReport> = reports.iter().filter(|r| r.converged).collect();
    if converged.is_empty() {
        return Ok(reports.into_iter().min_by(|a, b| a.residual_norm.total_cmp(&b.residual_norm)).unwrap());
    }
    let outer = build_hermite_rule(20)?;
    let inner = build_hermite_rule(SELECTION_INNER_ORDER)?;
    let mut best: Option<(f64, &SolveReport)> = None;
    for r in converged {
        let pair = CollocationPair::new(r.levels.clone(), rule.clone(), RootPolicy::default())?;
        let total = payoff_quadrature(params, &StrategyPair::Collocation(pair.into()), &outer, &inner)?.total;
        if best.is_none_or(|(b, _)| total < b) {
            best = Some((total, r));
        }
    }
    Ok(best.unwrap().1.clone())
}

/// Wraps a converged report as an evaluable pair using the default root policy.
pub fn solved_pair(report: &SolveReport, rule: &QuadratureRule) -> Result<StrategyPair> {
    if !report.converged {
        return Err(config(format!(
            "solve did not converge (residual norm {:e}); refusing to build a pair",
            report.residual_norm
        )));
    }
    let pair = CollocationPair::new(report.levels.clone(), rule.clone(), RootPolicy::default())?;
    Ok(StrategyPair::Collocation(pair.into()))
}

/// One-off evaluation of `γ̄₁(x₀)`. Builds the root-search table each call;
/// evaluate many points through [`CollocationPair`] instead.
pub fn eval_gamma1bar(x0: f64, levels: &SignalingLevels, rule: &QuadratureRule) -> Result<f64> {
    CollocationPair::new(levels.clone(), rule.clone(), RootPolicy::default())?.gamma1bar(x0)
}
