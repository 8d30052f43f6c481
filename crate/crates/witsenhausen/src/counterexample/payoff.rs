use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Prior, ProblemParams, StrategyPair};
use crate::error::{numeric, precondition, Result};
use crate::quadrature::{build_legendre_rule, QuadratureRule};

/// Samples per Monte Carlo chunk. Chunk `c` draws `x₀` from ChaCha stream `2c`
/// and `v` from stream `2c + 1`, so results do not depend on thread count.
pub const MC_CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    MonteCarlo { samples: usize, seed: u64 },
    Quadrature { outer_order: usize, inner_order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffBreakdown {
    pub stage1: f64,
    pub stage2: f64,
    pub total: f64,
    pub estimator: Estimator,
    /// Standard error of `total`; Monte Carlo only.
    pub std_error: Option<f64>,
}

impl PayoffBreakdown {
    fn new(stage1: f64, stage2: f64, estimator: Estimator, std_error: Option<f64>) -> Self {
        Self { stage1, stage2, total: stage1 + stage2, estimator, std_error }
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    s1: f64,
    s2: f64,
    t2: f64,
    bad: usize,
}

pub fn payoff_mc(params: &ProblemParams, pair: &StrategyPair, samples: usize, seed: u64) -> Result<PayoffBreakdown> {
    if samples == 0 {
        return Err(precondition("samples must be at least 1"));
    }
    let k2 = params.k2();
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut rx = ChaCha8Rng::seed_from_u64(seed);
            rx.set_stream(2 * c as u64);
            let mut rv = ChaCha8Rng::seed_from_u64(seed);
            rv.set_stream(2 * c as u64 + 1);
            let mut m = Moments::default();
            for _ in 0..len {
                let x0 = match params.prior {
                    Prior::Gaussian => params.sigma_x * rx.sample::<f64, _>(StandardNormal),
                    Prior::TwoPoint => {
                        if rx.random::<bool>() {
                            params.sigma_x
                        } else {
                            -params.sigma_x
                        }
                    }
                };
                let v = params.sigma * rv.sample::<f64, _>(StandardNormal);
                let x1 = pair.gamma1bar(x0);
                let a = k2 * (x1 - x0) * (x1 - x0);
                let e = x1 - pair.gamma2(x1 + v);
                let b = e * e;
                if !(a.is_finite() && b.is_finite()) {
                    m.bad += 1;
                    continue;
                }
                m.s1 += a;
                m.s2 += b;
                m.t2 += (a + b) * (a + b);
            }
            m
        })
        .collect();

    let mut tot = Moments::default();
    for p in &parts {
        tot.s1 += p.s1;
        tot.s2 += p.s2;
        tot.t2 += p.t2;
        tot.bad += p.bad;
    }
    if tot.bad > 0 {
        return Err(numeric(format!("strategy returned non-finite values on {} samples", tot.bad)));
    }
    let nf = samples as f64;
    let (s1, s2) = (tot.s1 / nf, tot.s2 / nf);
    let mean = s1 + s2;
    let var = if samples > 1 { ((tot.t2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok(PayoffBreakdown::new(s1, s2, Estimator::MonteCarlo { samples, seed }, Some((var / nf).sqrt())))
}

/// Outer integrals for the Gaussian prior are truncated here (in units of σ_x)
/// when the pair has jumps and composite panels are used.
const OUTER_CUTOFF: f64 = 10.0;
const PANEL_WIDTH: f64 = 0.5;

/// Nested quadrature: Gauss–Hermite over `v`, and over `x₀` either Gauss–Hermite
/// (smooth pairs), composite Gauss–Legendre split at the pair's breakpoints,
/// or the exact two-point sum.
pub fn payoff_quadrature(
    params: &ProblemParams,
    pair: &StrategyPair,
    outer_rule: &QuadratureRule,
    inner_rule: &QuadratureRule,
) -> Result<PayoffBreakdown> {
    let k2 = params.k2();
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let vscale = std::f64::consts::SQRT_2 * params.sigma;
    let point = |x0: f64| -> Result<(f64, f64)> {
        let x1 = pair.gamma1bar(x0);
        if !x1.is_finite() {
            return Err(numeric(format!("gamma1bar({x0:e}) is not finite")));
        }
        let mut s = 0.0;
        for (z, w) in inner_rule.iter() {
            let u2 = pair.gamma2(x1 + vscale * z);
            if !u2.is_finite() {
                return Err(numeric(format!("gamma2({:e}) is not finite", x1 + vscale * z)));
            }
            s += w * (x1 - u2) * (x1 - u2);
        }
        Ok((k2 * (x1 - x0) * (x1 - x0), s * inv_sqrt_pi))
    };

    let estimator = Estimator::Quadrature { outer_order: outer_rule.order(), inner_order: inner_rule.order() };
    let (s1, s2) = match params.prior {
        Prior::TwoPoint => {
            let (a1, a2) = point(params.sigma_x)?;
            let (b1, b2) = point(-params.sigma_x)?;
            (0.5 * (a1 + b1), 0.5 * (a2 + b2))
        }
        Prior::Gaussian => {
            let sx = params.sigma_x;
            let cut = OUTER_CUTOFF * sx;
            let mut bps: Vec<f64> = pair.breakpoints().into_iter().filter(|b| b.abs() < cut).collect();
            if bps.is_empty() {
                let xs = std::f64::consts::SQRT_2 * sx;
                let vals: Vec<(f64, f64)> =
                    outer_rule.nodes().par_iter().map(|&z| point(xs * z)).collect::<Result<_>>()?;
                let (mut s1, mut s2) = (0.0, 0.0);
                for ((a, b), w) in vals.iter().zip(outer_rule.weights()) {
                    s1 += w * a;
                    s2 += w * b;
                }
                (s1 * inv_sqrt_pi, s2 * inv_sqrt_pi)
            } else {
                bps.sort_by(|a, b| a.total_cmp(b));
                let gl = build_legendre_rule(outer_rule.order())?;
                let mut edges = vec![-cut];
                edges.extend(bps);
                edges.push(cut);
                let mut panels = Vec::new();
                for w in edges.windows(2) {
                    let m = ((w[1] - w[0]) / (PANEL_WIDTH * sx)).ceil().max(1.0) as usize;
                    let h = (w[1] - w[0]) / m as f64;
                    for i in 0..m {
                        panels.push((w[0] + i as f64 * h, w[0] + (i + 1) as f64 * h));
                    }
                }
                let dens_c = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sx);
                let mut nodes = Vec::new();
                for &(a, b) in &panels {
                    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
                    for (t, w) in gl.iter() {
                        let x = c + r * t;
                        nodes.push((x, w * r * dens_c * (-x * x / (2.0 * sx * sx)).exp()));
                    }
                }
                let vals: Vec<(f64, f64)> = nodes.par_iter().map(|&(x, _)| point(x)).collect::<Result<_>>()?;
                let (mut s1, mut s2) = (0.0, 0.0);
                for ((a, b), (_, w)) in vals.iter().zip(&nodes) {
                    s1 += w * a;
                    s2 += w * b;
                }
                (s1, s2)
            }
        }
    };
    Ok(PayoffBreakdown::new(s1, s2, estimator, None))
}
