//! The integral operator `F(γ̄₁, γ₂)` on grid-sampled strategies, Picard iteration,
//! Fréchet kernels and an empirical Lipschitz constant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::counterexample::{Prior, ProblemParams, StrategyPair};
use crate::error::{config, numeric, precondition, Result};
use crate::mixture::{log_mixture, posterior_mean};
use crate::quadrature::{symmetric_sum, QuadratureRule};

pub const DEFAULT_GRID_POINTS: usize = 201;
pub const DEFAULT_GRID_HALF_WIDTH: f64 = 6.0;
pub const DEFAULT_DAMPING: f64 = 0.5;
pub const DIVERGENCE_STEP: f64 = 1e6;
pub const LIPSCHITZ_EPS: f64 = 1e-4;
pub const LIPSCHITZ_SEED: u64 = 0x4c49_5053;

/// `(γ̄₁, γ₂)` sampled on one increasing grid; piecewise-linear in between,
/// constant beyond the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridStrategy {
    grid: Vec<f64>,
    values1: Vec<f64>,
    values2: Vec<f64>,
}

/// `points` equally spaced abscissas on `[−half_width·σ_x, half_width·σ_x]`.
pub fn uniform_grid(params: &ProblemParams, points: usize, half_width: f64) -> Vec<f64> {
    let a = half_width * params.sigma_x;
    (0..points)
        .map(|i| {
            // mirror-exact: grid[i] == -grid[n-1-i]
            let t = (2 * i) as f64 - (points - 1) as f64;
            a * t / (points - 1) as f64
        })
        .collect()
}

pub fn default_grid(params: &ProblemParams) -> Vec<f64> {
    uniform_grid(params, DEFAULT_GRID_POINTS, DEFAULT_GRID_HALF_WIDTH)
}

/// Sorted union of `base` and `extra`, dropping near-duplicates.
pub fn merge_grid(base: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = base.iter().chain(extra).copied().filter(|x| x.is_finite()).collect();
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    g
}

fn interp(grid: &[f64], vals: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if x <= grid[0] {
        return vals[0];
    }
    if x >= grid[n - 1] {
        return vals[n - 1];
    }
    let j = grid.partition_point(|g| *g <= x);
    let (a, b) = (j - 1, j);
    let t = (x - grid[a]) / (grid[b] - grid[a]);
    vals[a] + t * (vals[b] - vals[a])
}

impl GridStrategy {
    pub fn new(grid: Vec<f64>, values1: Vec<f64>, values2: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values1.len() || grid.len() != values2.len() {
            return Err(config("grid and value lists need equal length of at least 2"));
        }
        if !grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(config("grid must be strictly increasing"));
        }
        if grid.iter().chain(&values1).chain(&values2).any(|v| !v.is_finite()) {
            return Err(config("grid strategy contains non-finite values"));
        }
        Ok(Self { grid, values1, values2 })
    }

    pub fn from_pair(pair: &StrategyPair, grid: Vec<f64>) -> Result<Self> {
        let v1 = grid.iter().map(|&x| pair.gamma1bar(x)).collect();
        let v2 = grid.iter().map(|&y| pair.gamma2(y)).collect();
        Self::new(grid, v1, v2)
    }

    pub fn zeros(grid: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![0.0; n], vec![0.0; n])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values1(&self) -> &[f64] {
        &self.values1
    }

    pub fn values2(&self) -> &[f64] {
        &self.values2
    }

    pub fn gamma1bar(&self, x0: f64) -> f64 {
        interp(&self.grid, &self.values1, x0)
    }

    pub fn gamma2(&self, y1: f64) -> f64 {
        interp(&self.grid, &self.values2, y1)
    }

    /// Sup-norm distance over both components.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values1
            .iter()
            .zip(&other.values1)
            .chain(self.values2.iter().zip(&other.values2))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn blend(&self, other: &Self, alpha: f64) -> Self {
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (1.0 - alpha) * x + alpha * y).collect();
        Self { grid: self.grid.clone(), values1: mix(&self.values1, &other.values1), values2: mix(&self.values2, &other.values2) }
    }

    /// Composite-trapezoid weights on the grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { g[i] - g[i - 1] } else { 0.0 };
                let r = if i + 1 < n { g[i + 1] - g[i] } else { 0.0 };
                0.5 * (l + r)
            })
            .collect()
    }
}

/// Prior nodes and probabilities used for the Bayes ratio.
fn prior_nodes(params: &ProblemParams, rule: &QuadratureRule) -> (Vec<f64>, Vec<f64>) {
    match params.prior {
        Prior::Gaussian => {
            let c = std::f64::consts::SQRT_2 * params.sigma_x;
            let norm = 1.0 / std::f64::consts::PI.sqrt();
            rule.iter().map(|(z, w)| (c * z, w * norm)).unzip()
        }
        Prior::TwoPoint => (vec![-params.sigma_x, params.sigma_x], vec![0.5, 0.5]),
    }
}

/// `x₀ − ∫ f₁ dζ` at `γ̄₁(x₀) = g`, by Gauss–Hermite over `ζ − g`.
fn first_component(x0: f64, g: f64, gamma2: impl Fn(f64) -> f64, params: &ProblemParams, rule: &QuadratureRule) -> f64 {
    let vs = std::f64::consts::SQRT_2 * params.sigma;
    let inv_vs = 1.0 / vs;
    let terms: Vec<f64> = rule
        .iter()
        .map(|(z, w)| {
            let d = g - gamma2(vs * z + g);
            w * (z * inv_vs * d * d + d)
        })
        .collect();
    x0 - symmetric_sum(&terms) / (std::f64::consts::PI.sqrt() * params.k2())
}

/// `F` of a grid strategy, sampled on its own grid. Off-grid values of the
/// input are piecewise-linear interpolants.
pub fn apply_f(s: &GridStrategy, params: &ProblemParams, rule: &QuadratureRule) -> Result<GridStrategy> {
    apply_with(&s.grid, |x| s.gamma1bar(x), |y| s.gamma2(y), params, rule)
}

/// `F` of a pair, evaluated with the pair's own maps and sampled on `grid`.
pub fn apply_f_pair(pair: &StrategyPair, grid: Vec<f64>, params: &ProblemParams, rule: &QuadratureRule) -> Result<GridStrategy> {
    let s = GridStrategy::from_pair(pair, grid)?;
    apply_with(&s.grid, |x| pair.gamma1bar(x), |y| pair.gamma2(y), params, rule)
}

fn apply_with(
    grid: &[f64],
    gamma1bar: impl Fn(f64) -> f64,
    gamma2: impl Fn(f64) -> f64 + Copy,
    params: &ProblemParams,
    rule: &QuadratureRule,
) -> Result<GridStrategy> {
    let v1: Vec<f64> = grid.iter().map(|&x| first_component(x, gamma1bar(x), gamma2, params, rule)).collect();
    let (xi, p) = prior_nodes(params, rule);
    let means: Vec<f64> = xi.iter().map(|&x| gamma1bar(x)).collect();
    let v2 = grid
        .iter()
        .map(|&y| posterior_mean(&means, &p, y, params.sigma).ok_or_else(|| numeric("empty prior mixture")))
        .collect::<Result<Vec<_>>>()?;
    if v1.iter().chain(&v2).any(|v| !v.is_finite()) {
        return Err(numeric("operator produced non-finite values"));
    }
    Ok(GridStrategy { grid: grid.to_vec(), values1: v1, values2: v2 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardReport {
    pub strategy: GridStrategy,
    /// Sup-norm of each accepted update `s_{m+1} − s_m`.
    pub steps: Vec<f64>,
    pub converged: bool,
    pub diverged: bool,
}

impl PicardReport {
    pub fn monotone_decay(&self) -> bool {
        self.steps.windows(2).all(|w| w[1] <= w[0])
    }
}

/// `s ← (1 − α)s + α F(s)` until the sup-norm step drops below `tol`.
pub fn picard_iterate(
    init: &GridStrategy,
    params: &ProblemParams,
    rule: &QuadratureRule,
    alpha: f64,
    max_iter: usize,
    tol: f64,
) -> Result<PicardReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(precondition(format!("damping must lie in (0, 1], got {alpha}")));
    }
    let mut s = init.clone();
    let mut steps = Vec::new();
    for _ in 0..max_iter {
        let next = s.blend(&apply_f(&s, params, rule)?, alpha);
        let step = next.sup_distance(&s);
        steps.push(step);
        s = next;
        if !step.is_finite() || step > DIVERGENCE_STEP {
            return Ok(PicardReport { strategy: s, steps, converged: false, diverged: true });
        }
        if step < tol {
            return Ok(PicardReport { strategy: s, steps, converged: true, diverged: false });
        }
    }
    Ok(PicardReport { strategy: s, steps, converged: false, diverged: false })
}

/// Where to evaluate the kernels: `(x₀, ζ)` for `f₁`, `(ξ, y₁)` for `f₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetPoint {
    pub x0: f64,
    pub zeta: f64,
    pub xi: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetKernel {
    pub d1_gamma1bar: f64,
    pub d1_gamma2: f64,
    /// Density with respect to the prior `P_{x₀}(dξ)`.
    pub d2_gamma1bar: f64,
    pub d2_gamma2: f64,
}

fn normal_pdf(x: f64, sigma: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
}

/// `f₁(g, c; ζ) = −(1/k²)[(ζ − g)(g − c)²/2σ² + (g − c)]·N(ζ − g; σ²)`.
pub fn f1_integrand(params: &ProblemParams, g: f64, c: f64, zeta: f64) -> f64 {
    let s2 = params.sigma * params.sigma;
    let a = (zeta - g) * (g - c) * (g - c) / (2.0 * s2) + (g - c);
    -a * normal_pdf(zeta - g, params.sigma) / params.k2()
}

struct F2Parts {
    /// `e(ξ)/D`
    ratio: f64,
    /// current `∫γ̄₁ e dP / D`
    mean: f64,
    g: f64,
    /// `∫(y − γ̄₁)e dP / D`
    centred: f64,
}

fn f2_parts(s: &GridStrategy, params: &ProblemParams, rule: &QuadratureRule, xi: f64, y: f64) -> Result<F2Parts> {
    let (nodes, p) = prior_nodes(params, rule);
    let means: Vec<f64> = nodes.iter().map(|&x| s.gamma1bar(x)).collect();
    let log_d = log_mixture(&means, &p, y, params.sigma);
    let g = s.gamma1bar(xi);
    let s2 = params.sigma * params.sigma;
    let ratio = (-(y - g) * (y - g) / (2.0 * s2) - log_d).exp();
    let mean = posterior_mean(&means, &p, y, params.sigma).ok_or_else(|| numeric("empty prior mixture"))?;
    Ok(F2Parts { ratio, mean, g, centred: y - mean })
}

/// Derivatives of the integrands of `F` with respect to the strategy values.
pub fn frechet_kernel(s: &GridStrategy, params: &ProblemParams, rule: &QuadratureRule, at: FrechetPoint) -> Result<FrechetKernel> {
    let s2 = params.sigma * params.sigma;
    let k2 = params.k2();
    let g = s.gamma1bar(at.x0);
    let c = s.gamma2(at.zeta);
    let e = at.zeta - g;
    let dlt = g - c;
    let pdf = normal_pdf(e, params.sigma);
    let a = e * dlt * dlt / (2.0 * s2) + dlt;
    let d1_g = -((-dlt * dlt / (2.0 * s2) + e * dlt / s2 + 1.0) * pdf + a * e / s2 * pdf) / k2;
    let d1_c = -((-e * dlt / s2 - 1.0) * pdf) / k2;

    let q = f2_parts(s, params, rule, at.xi, at.y1)?;
    let d2_g = q.ratio * (1.0 + (q.g - q.mean) * (at.y1 - q.g) / s2);
    Ok(FrechetKernel { d1_gamma1bar: d1_g, d1_gamma2: d1_c, d2_gamma1bar: d2_g, d2_gamma2: 0.0 })
}

/// The commonly quoted kernel expressions, kept for comparison with
/// [`frechet_kernel`]; the `γ̄₁` kernels do not match the derivatives of `f`.
pub fn printed_frechet_kernel(
    s: &GridStrategy,
    params: &ProblemParams,
    rule: &QuadratureRule,
    at: FrechetPoint,
) -> Result<FrechetKernel> {
    let s2 = params.sigma * params.sigma;
    let k2 = params.k2();
    let g = s.gamma1bar(at.x0);
    let c = s.gamma2(at.zeta);
    let e = at.zeta - g;
    let dlt = g - c;
    let pdf = normal_pdf(e, params.sigma);
    let d1_g = -(-dlt * dlt / (2.0 * s2) + e * dlt / s2 + 1.0) * pdf / k2
        - (e * dlt * dlt / (2.0 * s2) + dlt) * (e / (2.0 * s2)) * pdf / k2;
    let d1_c = -(-e * dlt / s2 - 1.0) * pdf / k2;
    let q = f2_parts(s, params, rule, at.xi, at.y1)?;
    // e/D + γ̄[(y − γ̄)e/σ²·D − e∫(y − γ̄)e/σ² dP]/D²
    let d2_g = q.ratio + q.g * ((at.y1 - q.g) * q.ratio / s2 - q.ratio * q.centred / s2);
    Ok(FrechetKernel { d1_gamma1bar: d1_g, d1_gamma2: d1_c, d2_gamma1bar: d2_g, d2_gamma2: 0.0 })
}

/// Max over `probes` random unit directions `h` of `‖F(s + εh) − F(s)‖ / ε`,
/// norms being trapezoid L² on the grid over both components.
pub fn lipschitz_estimate(s: &GridStrategy, params: &ProblemParams, rule: &QuadratureRule, probes: usize) -> Result<f64> {
    lipschitz_estimate_seeded(s, params, rule, probes, LIPSCHITZ_SEED)
}

pub fn lipschitz_estimate_seeded(
    s: &GridStrategy,
    params: &ProblemParams,
    rule: &QuadratureRule,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    if probes == 0 {
        return Err(precondition("probes must be at least 1"));
    }
    let w = s.trapezoid_weights();
    let norm = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).zip(&w).map(|((x, y), w)| w * (x * x + y * y)).sum::<f64>().sqrt()
    };
    let base = apply_f(s, params, rule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = s.grid.len();
    let mut best: f64 = 0.0;
    for _ in 0..probes {
        let mut h1: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut h2: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let hn = norm(&h1, &h2);
        h1.iter_mut().chain(h2.iter_mut()).for_each(|v| *v /= hn);
        let shifted = GridStrategy {
            grid: s.grid.clone(),
            values1: s.values1.iter().zip(&h1).map(|(v, h)| v + LIPSCHITZ_EPS * h).collect(),
            values2: s.values2.iter().zip(&h2).map(|(v, h)| v + LIPSCHITZ_EPS * h).collect(),
        };
        let fs = apply_f(&shifted, params, rule)?;
        let d1: Vec<f64> = fs.values1.iter().zip(&base.values1).map(|(a, b)| a - b).collect();
        let d2: Vec<f64> = fs.values2.iter().zip(&base.values2).map(|(a, b)| a - b).collect();
        best = best.max(norm(&d1, &d2) / LIPSCHITZ_EPS);
    }
    Ok(best)
}
