//! Pointwise evaluation of the collocated strategy.
//!
//! `γ̄₁(x₀)` solves `φ(u) = u + h(u) = x₀`, and `φ` is far from monotone in the
//! nonlinear regime. A table of `φ` is split into monotone runs; each run whose
//! range contains `x₀` contributes one root candidate.

use serde::{Deserialize, Serialize};

use super::{collocation_points, correction, gamma2_from_levels, SignalingLevels};
use crate::counterexample::{Prior, ProblemParams};
use crate::error::{numeric, precondition, Result};
use crate::quadrature::{build_hermite_rule, QuadratureRule};
use crate::roots::brent;

/// Which root of `φ(u) = x₀` becomes `γ̄₁(x₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootPolicy {
    /// Root minimising `k²(u − x₀)² + E_v(u − γ₂(u + v))²`: the first stage's
    /// best response to the collocated γ₂.
    #[default]
    MinCost,
    /// Root closest to the level of the nearest collocation point.
    NearestLevel,
}

const TABLE_MAX: usize = 100_000;
const STAGE2_ORDER: usize = 32;
const BREAKPOINT_SCAN: usize = 4001;

#[derive(Debug, Clone)]
struct Run {
    lo: usize,
    hi: usize,
    increasing: bool,
    fmin: f64,
    fmax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Branch {
    Run(usize),
    LeftTail,
    RightTail,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    branch: Branch,
    a: f64,
    b: f64,
    approx: f64,
    cost: f64,
}

#[derive(Debug, Clone)]
pub struct CollocationPair {
    levels: SignalingLevels,
    rule: QuadratureRule,
    policy: RootPolicy,
    x0l: Vec<f64>,
    stage2_rule: QuadratureRule,
    u: Vec<f64>,
    phi: Vec<f64>,
    s2: Vec<f64>,
    runs: Vec<Run>,
    breakpoints: Vec<f64>,
}

impl CollocationPair {
    pub fn new(levels: SignalingLevels, rule: QuadratureRule, policy: RootPolicy) -> Result<Self> {
        let params = levels.params;
        if params.prior != Prior::Gaussian {
            return Err(precondition("collocation pairs need the Gaussian prior"));
        }
        if levels.values.len() != rule.order() {
            return Err(precondition(format!(
                "{} levels but rule order {}",
                levels.values.len(),
                rule.order()
            )));
        }
        let x0l = collocation_points(&params, &rule);
        let stage2_rule = build_hermite_rule(STAGE2_ORDER)?;
        let mut me = Self {
            levels,
            rule,
            policy,
            x0l,
            stage2_rule,
            u: vec![],
            phi: vec![],
            s2: vec![],
            runs: vec![],
            breakpoints: vec![],
        };
        me.build_table();
        me.breakpoints = me.find_breakpoints();
        Ok(me)
    }

    pub fn levels(&self) -> &SignalingLevels {
        &self.levels
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn params(&self) -> &ProblemParams {
        &self.levels.params
    }

    pub fn policy(&self) -> RootPolicy {
        self.policy
    }

    /// Values of `x₀` where the selected root jumps between branches.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn phi(&self, u: f64) -> f64 {
        u + correction(u, &self.levels.values, &self.levels.params, &self.rule)
    }

    pub fn gamma2(&self, y1: f64) -> f64 {
        gamma2_from_levels(y1, &self.levels.values, &self.rule, self.levels.params.sigma)
    }

    /// `E_v (u − γ₂(u + v))²`.
    pub fn stage2_at(&self, u: f64) -> f64 {
        let vs = std::f64::consts::SQRT_2 * self.levels.params.sigma;
        let s: f64 = self
            .stage2_rule
            .iter()
            .map(|(z, w)| {
                let d = u - self.gamma2(u + vs * z);
                w * d * d
            })
            .sum();
        s / std::f64::consts::PI.sqrt()
    }

    /// Pointwise cost of playing `x₁ = u` at `x₀`.
    pub fn pointwise_cost(&self, x0: f64, u: f64) -> f64 {
        self.levels.params.k2() * (u - x0) * (u - x0) + self.stage2_at(u)
    }

    /// Every root of `φ(u) = x₀`, ascending.
    pub fn roots(&self, x0: f64) -> Result<Vec<f64>> {
        let mut out = self
            .candidates(x0)?
            .iter()
            .map(|c| self.refine(c, x0))
            .collect::<Result<Vec<_>>>()?;
        out.sort_by(|a, b| a.total_cmp(b));
        Ok(out)
    }

    pub fn gamma1bar(&self, x0: f64) -> Result<f64> {
        let c = self.select(x0)?;
        self.refine(&c, x0)
    }

    fn build_table(&mut self) {
        let p = self.levels.params;
        let s = &self.levels.values;
        let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sorted = s.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
        let gmin = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let gmax = gaps.iter().copied().fold(0.0, f64::max);

        let lo = smin - 8.0 * p.sigma - 1e-3 * (1.0 + smin.abs());
        let hi = smax + 8.0 * p.sigma + 1e-3 * (1.0 + smax.abs());
        let mut step = p.sigma / 16.0;
        if gmin.is_finite() {
            step = step.min(gmin / 16.0);
        }
        if gmax > 0.0 {
            step = step.min(p.sigma * p.sigma / (8.0 * gmax));
        }
        let n = (((hi - lo) / step).ceil() as usize).clamp(64, TABLE_MAX);
        let h = (hi - lo) / n as f64;
        let u: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
        let phi: Vec<f64> = u.iter().map(|&x| self.phi(x)).collect();
        let s2: Vec<f64> = match self.policy {
            RootPolicy::MinCost => u.iter().map(|&x| self.stage2_at(x)).collect(),
            RootPolicy::NearestLevel => vec![],
        };

        let mut runs = Vec::new();
        let mut start = 0;
        let mut dir = 0i8;
        for i in 0..n {
            let d = phi[i + 1] - phi[i];
            let sd = if d > 0.0 {
                1
            } else if d < 0.0 {
                -1
            } else {
                0
            };
            if sd != 0 && dir != 0 && sd != dir {
                runs.push((start, i, dir > 0));
                start = i;
            }
            if sd != 0 {
                dir = sd;
            }
        }
        runs.push((start, n, dir >= 0));
        self.runs = runs
            .into_iter()
            .map(|(lo, hi, increasing)| {
                let (a, b) = (phi[lo], phi[hi]);
                Run { lo, hi, increasing, fmin: a.min(b), fmax: a.max(b) }
            })
            .collect();
        self.u = u;
        self.phi = phi;
        self.s2 = s2;
    }

    fn interp_s2(&self, i: usize, t: f64) -> f64 {
        if self.s2.is_empty() {
            return f64::NAN;
        }
        self.s2[i] + t * (self.s2[i + 1] - self.s2[i])
    }

    fn candidates(&self, x0: f64) -> Result<Vec<Candidate>> {
        let k2 = self.levels.params.k2();
        let mut out = Vec::new();
        for (ri, r) in self.runs.iter().enumerate() {
            if x0 < r.fmin || x0 > r.fmax {
                continue;
            }
            // first cell in the run whose far edge has crossed x0
            let (mut a, mut b) = (r.lo, r.hi);
            let above = |i: usize| if r.increasing { self.phi[i] >= x0 } else { self.phi[i] <= x0 };
            while b - a > 1 {
                let m = (a + b) / 2;
                if above(m) {
                    b = m;
                } else {
                    a = m;
                }
            }
            let (fa, fb) = (self.phi[a], self.phi[b]);
            let t = if fb != fa { ((x0 - fa) / (fb - fa)).clamp(0.0, 1.0) } else { 0.5 };
            let approx = self.u[a] + t * (self.u[b] - self.u[a]);
            let cost = k2 * (approx - x0) * (approx - x0) + self.interp_s2(a, t);
            out.push(Candidate { branch: Branch::Run(ri), a: self.u[a], b: self.u[b], approx, cost });
        }
        let n = self.u.len() - 1;
        let width = self.u[n] - self.u[0];
        if x0 > self.phi[n] {
            let (a, mut b) = (self.u[n], self.u[n] + width.max(1.0));
            for _ in 0..200 {
                if self.phi(b) >= x0 {
                    break;
                }
                b = a + 2.0 * (b - a);
            }
            out.push(Candidate { branch: Branch::RightTail, a, b, approx: b, cost: f64::NAN });
        }
        if x0 < self.phi[0] {
            let (mut a, b) = (self.u[0] - width.max(1.0), self.u[0]);
            for _ in 0..200 {
                if self.phi(a) <= x0 {
                    break;
                }
                a = b - 2.0 * (b - a);
            }
            out.push(Candidate { branch: Branch::LeftTail, a, b, approx: a, cost: f64::NAN });
        }
        if out.is_empty() {
            return Err(numeric(format!(
                "no sign change of phi(u) - x0 for x0 = {x0:e} on u in [{:e}, {:e}]",
                self.u[0], self.u[n]
            )));
        }
        Ok(out)
    }

    fn refine(&self, c: &Candidate, x0: f64) -> Result<f64> {
        let tol = 1e-13 * (1.0 + c.approx.abs());
        brent(|u| self.phi(u) - x0, c.a, c.b, tol, 200)
    }

    fn select(&self, x0: f64) -> Result<Candidate> {
        let mut cands = self.candidates(x0)?;
        if cands.len() == 1 {
            return Ok(cands[0]);
        }
        match self.policy {
            RootPolicy::NearestLevel => {
                let l = self
                    .x0l
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - x0).abs().total_cmp(&(b.1 - x0).abs()))
                    .map(|(i, _)| i)
                    .unwrap();
                let target = self.levels.values[l];
                let mut best = None;
                let mut bd = f64::INFINITY;
                for c in &cands {
                    let u = self.refine(c, x0)?;
                    if (u - target).abs() < bd {
                        bd = (u - target).abs();
                        best = Some(*c);
                    }
                }
                Ok(best.unwrap())
            }
            RootPolicy::MinCost => {
                // tails carry no tabulated cost; price them exactly
                for c in cands.iter_mut().filter(|c| c.cost.is_nan()) {
                    let u = self.refine(c, x0)?;
                    c.approx = u;
                    c.cost = self.pointwise_cost(x0, u);
                }
                cands.sort_by(|a, b| a.cost.total_cmp(&b.cost));
                let (c0, c1) = (cands[0], cands[1]);
                if c1.cost - c0.cost > 1e-6 * (1.0 + c0.cost.abs()) {
                    return Ok(c0);
                }
                let e0 = self.pointwise_cost(x0, self.refine(&c0, x0)?);
                let e1 = self.pointwise_cost(x0, self.refine(&c1, x0)?);
                Ok(if e1 < e0 { c1 } else { c0 })
            }
        }
    }

    fn find_breakpoints(&self) -> Vec<f64> {
        let sx = self.levels.params.sigma_x;
        let lim = 10.0 * sx;
        let branch = |x: f64| self.select(x).map(|c| c.branch).ok();
        let xs: Vec<f64> =
            (0..BREAKPOINT_SCAN).map(|i| -lim + 2.0 * lim * i as f64 / (BREAKPOINT_SCAN - 1) as f64).collect();
        let ids: Vec<Option<Branch>> = xs.iter().map(|&x| branch(x)).collect();
        let mut out = Vec::new();
        for i in 0..xs.len() - 1 {
            if ids[i] == ids[i + 1] {
                continue;
            }
            let (mut a, mut b) = (xs[i], xs[i + 1]);
            let ia = ids[i];
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if branch(m) == ia {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        out
    }
}
