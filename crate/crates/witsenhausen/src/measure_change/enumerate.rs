use serde::{Deserialize, Serialize};

use super::{Compensated, FiniteTeamModel, StrategyProfile};
use crate::error::{config, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    /// `[t][m]`
    pub observations: Vec<Vec<usize>>,
    /// `[t][k]`
    pub actions: Vec<Vec<usize>>,
}

/// All trajectories with their probabilities under both measures and the
/// terminal density `Θ_{n-1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointMeasure {
    pub trajectories: Vec<Trajectory>,
    pub original: Vec<f64>,
    pub reference: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: usize,
    /// History `x_0 … x_{t-1}` on which the conditional expectation was taken.
    pub states: Vec<usize>,
    pub observations: Vec<Vec<usize>>,
    /// `Θ_{t-1}` on that history (1 at `t = 0`).
    pub previous: f64,
    /// `E°[Θ_t | F_{t-1}]`
    pub conditional: f64,
}

impl Violation {
    pub fn gap(&self) -> f64 {
        (self.conditional - self.previous).abs()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingaleReport {
    /// `E°[Θ_t]` for each `t`.
    pub unconditional: Vec<f64>,
    pub max_unconditional_gap: f64,
    pub max_conditional_gap: f64,
    pub worst: Option<Violation>,
}

impl MartingaleReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_conditional_gap <= tol && self.max_unconditional_gap <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffEquivalence {
    /// `E^u[Σ ℓ + κ]`
    pub original: f64,
    /// `Σ_t E°[ℓ_t Θ_t] + E°[κ Θ_{n-1}]`
    pub reference: f64,
}

impl PayoffEquivalence {
    pub fn gap(&self) -> f64 {
        (self.original - self.reference).abs()
    }
}

/// One depth-first pass accumulating every quantity at once.
struct Walk<'a> {
    model: &'a FiniteTeamModel,
    profile: &'a StrategyProfile,
    states: Vec<usize>,
    obs: Vec<Vec<usize>>,
    actions: Vec<Vec<usize>>,
    joint: Vec<usize>,
    // Θ_0 … Θ_t along the current path
    theta: Vec<f64>,
    unconditional: Vec<Compensated>,
    orig_payoff: Compensated,
    ref_payoff: Compensated,
    worst: Option<Violation>,
    collect: Option<JointMeasure>,
}

impl<'a> Walk<'a> {
    fn new(model: &'a FiniteTeamModel, profile: &'a StrategyProfile, collect: bool) -> Result<Self> {
        model.check_profile(profile)?;
        let n = model.horizon;
        Ok(Self {
            model,
            profile,
            states: Vec::with_capacity(n),
            obs: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            joint: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
            unconditional: vec![Compensated::default(); n],
            orig_payoff: Compensated::default(),
            ref_payoff: Compensated::default(),
            worst: None,
            collect: collect.then(|| JointMeasure {
                trajectories: Vec::new(),
                original: Vec::new(),
                reference: Vec::new(),
                theta: Vec::new(),
            }),
        })
    }

    fn info_index(&self, t: usize, k: usize) -> usize {
        let m = self.model;
        let p = &m.information[t][k];
        let mut idx = 0;
        let mut radix = 1;
        for &(tau, post) in &p.observations {
            idx += self.obs[tau][post] * radix;
            radix *= m.obs_sizes[tau][post];
        }
        for &(tau, kk) in &p.actions {
            idx += self.actions[tau][kk] * radix;
            radix *= m.action_sizes[tau][kk];
        }
        idx
    }

    fn run(&mut self) {
        self.step(0, 1.0, 1.0);
    }

    fn step(&mut self, t: usize, p_orig: f64, p_ref: f64) {
        let m = self.model;
        let n = m.horizon;
        if t == n {
            self.leaf(p_orig, p_ref);
            return;
        }
        // u_t depends only on the history before t
        let acts: Vec<usize> = (0..m.stations())
            .map(|k| self.profile.tables[t][k][self.info_index(t, k)])
            .collect();
        let u = m.joint_index(t, &acts);
        self.actions.push(acts);
        self.joint.push(u);

        let prev_theta = self.theta.last().copied().unwrap_or(1.0);
        let posts = m.posts();
        let mut conditional = Compensated::default();
        let mut ys = vec![0usize; posts];
        for x in 0..m.state_sizes[t] {
            let (s, psi) = if t == 0 {
                (m.state_reference[0][x], m.state_reference[0][x])
            } else {
                (m.transition[t - 1][self.states[t - 1]][self.joint[t - 1]][x], m.state_reference[t][x])
            };
            let m_factor = if t == 0 { 1.0 } else { s / psi };
            self.states.push(x);
            ys.iter_mut().for_each(|y| *y = 0);
            loop {
                let mut q = 1.0;
                let mut phi = 1.0;
                for (post, &y) in ys.iter().enumerate() {
                    q *= m.observation[t][post][x][u][y];
                    phi *= m.obs_reference[t][post][y];
                }
                let theta = prev_theta * (q / phi) * m_factor;
                let ref_step = psi * phi;
                conditional.add(ref_step * theta);
                self.unconditional[t].add(p_ref * ref_step * theta);
                self.obs.push(ys.clone());
                self.theta.push(theta);
                self.step(t + 1, p_orig * s * q, p_ref * ref_step);
                self.theta.pop();
                self.obs.pop();
                if !advance(&mut ys, &m.obs_sizes[t]) {
                    break;
                }
            }
            self.states.pop();
        }
        let c = conditional.value();
        if self.worst.as_ref().is_none_or(|w| (c - prev_theta).abs() > w.gap()) {
            self.worst = Some(Violation {
                t,
                states: self.states.clone(),
                observations: self.obs.clone(),
                previous: prev_theta,
                conditional: c,
            });
        }
        self.actions.pop();
        self.joint.pop();
    }

    fn leaf(&mut self, p_orig: f64, p_ref: f64) {
        let m = self.model;
        let n = m.horizon;
        let mut cost = Compensated::default();
        let mut weighted = Compensated::default();
        for t in 0..n - 1 {
            let l = m.stage_cost[t][self.states[t]][self.joint[t]];
            cost.add(l);
            weighted.add(l * self.theta[t]);
        }
        let kappa = m.terminal_cost[self.states[n - 1]];
        cost.add(kappa);
        weighted.add(kappa * self.theta[n - 1]);
        self.orig_payoff.add(p_orig * cost.value());
        self.ref_payoff.add(p_ref * weighted.value());
        if let Some(c) = self.collect.as_mut() {
            c.trajectories.push(Trajectory {
                states: self.states.clone(),
                observations: self.obs.clone(),
                actions: self.actions.clone(),
            });
            c.original.push(p_orig);
            c.reference.push(p_ref);
            c.theta.push(self.theta[n - 1]);
        }
    }
}

/// Little-endian odometer over a product space; false once it wraps.
pub(super) fn advance(digits: &mut [usize], sizes: &[usize]) -> bool {
    for (d, &s) in digits.iter_mut().zip(sizes) {
        *d += 1;
        if *d < s {
            return true;
        }
        *d = 0;
    }
    false
}

pub fn joint_measure_original(model: &FiniteTeamModel, profile: &StrategyProfile) -> Result<JointMeasure> {
    let mut w = Walk::new(model, profile, true)?;
    w.run();
    Ok(w.collect.expect("collection was requested"))
}

/// `Θ_t = Π_{s≤t} λ_s · Π_{1≤s≤t} m_s` along one trajectory, with
/// `λ_s = Π_m Q_s^m(y_s^m | x_s, u_s)/Φ_s^m(y_s^m)` and
/// `m_s = S_{s-1}(x_s | x_{s-1}, u_{s-1})/Ψ_s(x_s)`.
pub fn rnd_process(model: &FiniteTeamModel, profile: &StrategyProfile, states: &[usize], observations: &[Vec<usize>]) -> Result<Vec<f64>> {
    model.check_profile(profile)?;
    let n = model.horizon;
    if states.len() != n || observations.len() != n {
        return Err(config(format!("trajectory must cover all {n} times")));
    }
    let mut w = Walk::new(model, profile, false)?;
    let mut theta = 1.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let x = states[t];
        if x >= model.state_sizes[t] || observations[t].len() != model.posts() {
            return Err(config(format!("trajectory out of range at time {t}")));
        }
        let acts: Vec<usize> = (0..model.stations())
            .map(|k| profile.tables[t][k][w.info_index(t, k)])
            .collect();
        let u = model.joint_index(t, &acts);
        if t > 0 {
            let (xp, up) = (states[t - 1], w.joint[t - 1]);
            theta *= model.transition[t - 1][xp][up][x] / model.state_reference[t][x];
        }
        for (post, &y) in observations[t].iter().enumerate() {
            if y >= model.obs_sizes[t][post] {
                return Err(config(format!("observation out of range at time {t}, post {post}")));
            }
            theta *= model.observation[t][post][x][u][y] / model.obs_reference[t][post][y];
        }
        out.push(theta);
        w.actions.push(acts);
        w.joint.push(u);
        w.obs.push(observations[t].clone());
    }
    Ok(out)
}

/// Checks `E°[Θ_t | F_{t-1}] = Θ_{t-1}` on every history and `E°[Θ_t] = 1`.
pub fn verify_martingale(model: &FiniteTeamModel, profile: &StrategyProfile) -> Result<MartingaleReport> {
    let mut w = Walk::new(model, profile, false)?;
    w.run();
    let unconditional: Vec<f64> = w.unconditional.iter().map(|c| c.value()).collect();
    let max_unconditional_gap = unconditional.iter().map(|e| (e - 1.0).abs()).fold(0.0, f64::max);
    Ok(MartingaleReport {
        max_unconditional_gap,
        max_conditional_gap: w.worst.as_ref().map_or(0.0, Violation::gap),
        unconditional,
        worst: w.worst,
    })
}

/// Expected cost computed directly and through the reference measure.
pub fn payoff_equivalence(model: &FiniteTeamModel, profile: &StrategyProfile) -> Result<PayoffEquivalence> {
    let mut w = Walk::new(model, profile, false)?;
    w.run();
    Ok(PayoffEquivalence { original: w.orig_payoff.value(), reference: w.ref_payoff.value() })
}

/// Expected cost under the original measure.
pub(crate) fn expected_cost(model: &FiniteTeamModel, profile: &StrategyProfile) -> Result<f64> {
    let mut w = Walk::new(model, profile, false)?;
    w.run();
    Ok(w.orig_payoff.value())
}
