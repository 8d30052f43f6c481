//! Finite team models and exact checks of the change-of-measure identities.
//!
//! Times are 0-based: `x_0 … x_{n-1}`. Under the original measure `x_0 ~ Ψ_0`,
//! `x_{t+1} ~ S_t(·| x_t, u_t)` and each post `m` sees `y_t^m ~ Q_t^m(·| x_t, u_t)`.
//! Actions `u_t^k` are lookup-table functions of station `k`'s information,
//! which may only mention observations and actions at times `< t`.
//! Under the reference measure states and observations are independent with
//! laws `Ψ_t` and `Φ_t^m`.

mod enumerate;
mod pbp;
mod random;

use serde::{Deserialize, Serialize};

use crate::error::{config, precondition, Error, Result};

use enumerate::advance as enumerate_advance;
pub use enumerate::{
    joint_measure_original, payoff_equivalence, rnd_process, verify_martingale, JointMeasure, MartingaleReport,
    PayoffEquivalence, Trajectory, Violation,
};
pub use pbp::{brute_force_pbp, PbpResult, StrategySpace};
pub use random::{random_model, random_profile, RandomShape};

pub const TRAJECTORY_LIMIT: u64 = 10_000_000;
pub const PROFILE_LIMIT: u64 = 1_000_000;

/// What station `k` knows at time `t`: earlier observations `(τ, m)` and
/// earlier actions `(τ, k')`, in this order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoPattern {
    #[serde(default)]
    pub observations: Vec<(usize, usize)>,
    #[serde(default)]
    pub actions: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteTeamModel {
    pub horizon: usize,
    /// `|X_t|`
    pub state_sizes: Vec<usize>,
    /// `|Y_t^m|`, indexed `[t][m]`
    pub obs_sizes: Vec<Vec<usize>>,
    /// `|A_t^k|`, indexed `[t][k]`
    pub action_sizes: Vec<Vec<usize>>,
    /// `S_t(x_{t+1} | x_t, u_t)` for `t < n-1`, indexed `[t][x_t][u_t][x_{t+1}]`
    pub transition: Vec<Vec<Vec<Vec<f64>>>>,
    /// `Q_t^m(y | x_t, u_t)`, indexed `[t][m][x_t][u_t][y]`
    pub observation: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `Ψ_t`, indexed `[t][x]`; `Ψ_0` is also the law of `x_0`
    pub state_reference: Vec<Vec<f64>>,
    /// `Φ_t^m`, indexed `[t][m][y]`
    pub obs_reference: Vec<Vec<Vec<f64>>>,
    /// `ℓ(t, x_t, u_t)` for `t < n-1`, indexed `[t][x_t][u_t]`
    pub stage_cost: Vec<Vec<Vec<f64>>>,
    /// `κ(x_{n-1})`
    pub terminal_cost: Vec<f64>,
    /// `I_t^k`, indexed `[t][k]`
    pub information: Vec<Vec<InfoPattern>>,
}

/// Joint actions `u_t = (u_t^0, …, u_t^{K-1})` are flattened little-endian:
/// `index = Σ_k a_k Π_{k'<k} |A_t^{k'}|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyProfile {
    /// `[t][k][info index] → action`
    pub tables: Vec<Vec<Vec<usize>>>,
}

/// A row of a kernel whose entries do not sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDefect {
    pub location: String,
    pub sum: f64,
}

/// Model file: a model plus an optional profile (all-zero actions if absent).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub model: FiniteTeamModel,
    #[serde(default)]
    pub profile: Option<StrategyProfile>,
}

impl ModelDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        doc.model.validate()?;
        if let Some(p) = &doc.profile {
            doc.model.check_profile(p)?;
        }
        Ok(doc)
    }

    pub fn profile_or_default(&self) -> StrategyProfile {
        self.profile.clone().unwrap_or_else(|| self.model.constant_profile(0))
    }
}

fn product(sizes: impl IntoIterator<Item = usize>) -> u64 {
    sizes.into_iter().fold(1u64, |a, s| a.saturating_mul(s as u64))
}

impl FiniteTeamModel {
    pub fn stations(&self) -> usize {
        self.action_sizes.first().map_or(0, |a| a.len())
    }

    pub fn posts(&self) -> usize {
        self.obs_sizes.first().map_or(0, |o| o.len())
    }

    pub fn joint_actions(&self, t: usize) -> usize {
        self.action_sizes[t].iter().product()
    }

    pub fn joint_index(&self, t: usize, actions: &[usize]) -> usize {
        let mut idx = 0;
        let mut radix = 1;
        for (k, &a) in actions.iter().enumerate() {
            idx += a * radix;
            radix *= self.action_sizes[t][k];
        }
        idx
    }

    /// Number of distinct realisations of `I_t^k`.
    pub fn info_size(&self, t: usize, k: usize) -> usize {
        let p = &self.information[t][k];
        p.observations.iter().map(|&(tau, m)| self.obs_sizes[tau][m]).product::<usize>()
            * p.actions.iter().map(|&(tau, kk)| self.action_sizes[tau][kk]).product::<usize>()
    }

    pub fn trajectory_count(&self) -> u64 {
        product(self.state_sizes.iter().copied()) * product(self.obs_sizes.iter().flatten().copied())
    }

    /// Every station always plays action `a` (clamped to the action set).
    pub fn constant_profile(&self, a: usize) -> StrategyProfile {
        let tables = (0..self.horizon)
            .map(|t| {
                (0..self.stations())
                    .map(|k| vec![a.min(self.action_sizes[t][k] - 1); self.info_size(t, k)])
                    .collect()
            })
            .collect();
        StrategyProfile { tables }
    }

    /// Structural checks: shapes, causal information, strictly positive references.
    /// Row sums are not checked here; see [`FiniteTeamModel::kernel_defects`].
    pub fn validate(&self) -> Result<()> {
        let n = self.horizon;
        if n == 0 {
            return Err(config("horizon must be at least 1"));
        }
        let len = |name: &str, got: usize, want: usize| -> Result<()> {
            if got == want {
                Ok(())
            } else {
                Err(config(format!("{name}: expected length {want}, found {got}")))
            }
        };
        len("state_sizes", self.state_sizes.len(), n)?;
        len("obs_sizes", self.obs_sizes.len(), n)?;
        len("action_sizes", self.action_sizes.len(), n)?;
        len("transition", self.transition.len(), n - 1)?;
        len("observation", self.observation.len(), n)?;
        len("state_reference", self.state_reference.len(), n)?;
        len("obs_reference", self.obs_reference.len(), n)?;
        len("stage_cost", self.stage_cost.len(), n - 1)?;
        len("information", self.information.len(), n)?;
        let (mm, kk) = (self.posts(), self.stations());
        for t in 0..n {
            len(&format!("obs_sizes[{t}]"), self.obs_sizes[t].len(), mm)?;
            len(&format!("action_sizes[{t}]"), self.action_sizes[t].len(), kk)?;
            if self.state_sizes[t] == 0
                || self.obs_sizes[t].contains(&0)
                || self.action_sizes[t].contains(&0)
            {
                return Err(config(format!("time {t}: every space needs at least one element")));
            }
        }
        len("terminal_cost", self.terminal_cost.len(), self.state_sizes[n - 1])?;
        if self.trajectory_count() > TRAJECTORY_LIMIT {
            return Err(config(format!(
                "{} trajectories exceed the enumeration limit {TRAJECTORY_LIMIT}",
                self.trajectory_count()
            )));
        }
        for t in 0..n {
            let xs = self.state_sizes[t];
            let us = self.joint_actions(t);
            len(&format!("state_reference[{t}]"), self.state_reference[t].len(), xs)?;
            for (x, &p) in self.state_reference[t].iter().enumerate() {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(precondition(format!(
                        "state_reference[{t}][{x}] = {p}: reference measures need full support"
                    )));
                }
            }
            len(&format!("observation[{t}]"), self.observation[t].len(), mm)?;
            len(&format!("obs_reference[{t}]"), self.obs_reference[t].len(), mm)?;
            for m in 0..mm {
                let ys = self.obs_sizes[t][m];
                len(&format!("obs_reference[{t}][{m}]"), self.obs_reference[t][m].len(), ys)?;
                for (y, &p) in self.obs_reference[t][m].iter().enumerate() {
                    if !(p > 0.0 && p.is_finite()) {
                        return Err(precondition(format!(
                            "obs_reference[{t}][{m}][{y}] = {p}: reference measures need full support"
                        )));
                    }
                }
                let q = &self.observation[t][m];
                len(&format!("observation[{t}][{m}]"), q.len(), xs)?;
                for (x, row) in q.iter().enumerate() {
                    len(&format!("observation[{t}][{m}][{x}]"), row.len(), us)?;
                    for (u, r) in row.iter().enumerate() {
                        len(&format!("observation[{t}][{m}][{x}][{u}]"), r.len(), ys)?;
                        check_entries(r, &format!("observation[{t}][{m}][{x}][{u}]"))?;
                    }
                }
            }
            if t + 1 < n {
                let s = &self.transition[t];
                len(&format!("transition[{t}]"), s.len(), xs)?;
                for (x, row) in s.iter().enumerate() {
                    len(&format!("transition[{t}][{x}]"), row.len(), us)?;
                    for (u, r) in row.iter().enumerate() {
                        len(&format!("transition[{t}][{x}][{u}]"), r.len(), self.state_sizes[t + 1])?;
                        check_entries(r, &format!("transition[{t}][{x}][{u}]"))?;
                    }
                }
                len(&format!("stage_cost[{t}]"), self.stage_cost[t].len(), xs)?;
                for (x, row) in self.stage_cost[t].iter().enumerate() {
                    len(&format!("stage_cost[{t}][{x}]"), row.len(), us)?;
                }
            }
            len(&format!("information[{t}]"), self.information[t].len(), kk)?;
            for (k, p) in self.information[t].iter().enumerate() {
                for &(tau, m) in &p.observations {
                    if tau >= t || m >= mm {
                        return Err(config(format!(
                            "information[{t}][{k}] lists observation ({tau}, {m}); only times before {t} and posts below {mm} are allowed"
                        )));
                    }
                }
                for &(tau, kp) in &p.actions {
                    if tau >= t || kp >= kk {
                        return Err(config(format!(
                            "information[{t}][{k}] lists action ({tau}, {kp}); only times before {t} and stations below {kk} are allowed"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_profile(&self, p: &StrategyProfile) -> Result<()> {
        if p.tables.len() != self.horizon {
            return Err(config(format!("profile has {} times, model horizon is {}", p.tables.len(), self.horizon)));
        }
        for t in 0..self.horizon {
            if p.tables[t].len() != self.stations() {
                return Err(config(format!("profile time {t}: expected {} stations", self.stations())));
            }
            for k in 0..self.stations() {
                let tab = &p.tables[t][k];
                if tab.len() != self.info_size(t, k) {
                    return Err(config(format!(
                        "profile[{t}][{k}] has {} entries; the information set has {} realisations",
                        tab.len(),
                        self.info_size(t, k)
                    )));
                }
                if let Some(a) = tab.iter().find(|&&a| a >= self.action_sizes[t][k]) {
                    return Err(config(format!("profile[{t}][{k}] uses action {a} outside A_{t}^{k}")));
                }
            }
        }
        Ok(())
    }

    /// Kernel rows whose sum differs from 1 by more than `tol`.
    pub fn kernel_defects(&self, tol: f64) -> Vec<KernelDefect> {
        let mut out = Vec::new();
        for (t, s) in self.transition.iter().enumerate() {
            for (x, row) in s.iter().enumerate() {
                for (u, r) in row.iter().enumerate() {
                    let sum: f64 = r.iter().sum();
                    if (sum - 1.0).abs() > tol {
                        out.push(KernelDefect { location: format!("transition[{t}][{x}][{u}]"), sum });
                    }
                }
            }
        }
        for (t, q) in self.observation.iter().enumerate() {
            for (m, qm) in q.iter().enumerate() {
                for (x, row) in qm.iter().enumerate() {
                    for (u, r) in row.iter().enumerate() {
                        let sum: f64 = r.iter().sum();
                        if (sum - 1.0).abs() > tol {
                            out.push(KernelDefect { location: format!("observation[{t}][{m}][{x}][{u}]"), sum });
                        }
                    }
                }
            }
        }
        let refs = self
            .state_reference
            .iter()
            .enumerate()
            .map(|(t, r)| (format!("state_reference[{t}]"), r))
            .chain(self.obs_reference.iter().enumerate().flat_map(|(t, rs)| {
                rs.iter().enumerate().map(move |(m, r)| (format!("obs_reference[{t}][{m}]"), r))
            }));
        for (location, r) in refs {
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > tol {
                out.push(KernelDefect { location, sum });
            }
        }
        out
    }
}

fn check_entries(r: &[f64], at: &str) -> Result<()> {
    if r.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(config(format!("{at}: probabilities must be finite and non-negative")));
    }
    Ok(())
}

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_models_satisfy_identities() {
        for seed in 0..5 {
            let m = random_model(&RandomShape::default(), seed).unwrap();
            let p = random_profile(&m, seed + 100);
            let r = verify_martingale(&m, &p).unwrap();
            assert!(r.holds(1e-12), "seed {seed}: {r:?}");
            assert!(payoff_equivalence(&m, &p).unwrap().gap() < 1e-12);
            let j = joint_measure_original(&m, &p).unwrap();
            let total: f64 = j.original.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for i in 0..j.original.len() {
                assert!((j.original[i] - j.reference[i] * j.theta[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn corrupted_row_is_located() {
        let mut m = random_model(&RandomShape::default(), 7).unwrap();
        m.transition[1][0][0][1] += 0.25;
        let defects = m.kernel_defects(1e-12);
        assert_eq!(defects.len(), 1);
        assert_eq!(defects[0].location, "transition[1][0][0]");
        let r = verify_martingale(&m, &m.constant_profile(0)).unwrap();
        assert!(!r.holds(1e-12));
        let w = r.worst.unwrap();
        assert_eq!(w.t, 2);
        assert_eq!(w.states[1], 0);
    }

    #[test]
    fn acausal_information_rejected() {
        let mut m = random_model(&RandomShape::default(), 1).unwrap();
        m.information[1][0].observations = vec![(1, 0)];
        assert!(m.validate().is_err());
    }
}
