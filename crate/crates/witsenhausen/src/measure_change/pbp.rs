use serde::{Deserialize, Serialize};

use super::enumerate::expected_cost;
use super::{FiniteTeamModel, StrategyProfile, PROFILE_LIMIT};
use crate::error::{config, Result};

/// Candidate strategies per station; a station strategy is one lookup table per time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySpace {
    /// `[k][choice][t] → table`
    pub stations: Vec<Vec<Vec<Vec<usize>>>>,
}

impl StrategySpace {
    /// Every deterministic lookup table for every station.
    pub fn full(model: &FiniteTeamModel) -> Result<Self> {
        let mut stations = Vec::with_capacity(model.stations());
        for k in 0..model.stations() {
            // one digit per (t, information realisation)
            let mut sizes = Vec::new();
            for t in 0..model.horizon {
                sizes.extend(std::iter::repeat_n(model.action_sizes[t][k], model.info_size(t, k)));
            }
            let count = sizes.iter().try_fold(1u64, |a, &s| a.checked_mul(s as u64));
            if count.is_none_or(|c| c > PROFILE_LIMIT) {
                return Err(config(format!("station {k} has more than {PROFILE_LIMIT} strategies")));
            }
            let mut choices = Vec::with_capacity(count.unwrap() as usize);
            let mut digits = vec![0usize; sizes.len()];
            loop {
                let mut it = digits.iter().copied();
                let tables = (0..model.horizon)
                    .map(|t| (&mut it).take(model.info_size(t, k)).collect())
                    .collect();
                choices.push(tables);
                if !super::enumerate_advance(&mut digits, &sizes) {
                    break;
                }
            }
            stations.push(choices);
        }
        let space = Self { stations };
        space.profile_count()?;
        Ok(space)
    }

    pub fn profile_count(&self) -> Result<usize> {
        let c = self
            .stations
            .iter()
            .try_fold(1u64, |a, s| a.checked_mul(s.len() as u64))
            .filter(|&c| c <= PROFILE_LIMIT)
            .ok_or_else(|| config(format!("strategy space exceeds {PROFILE_LIMIT} profiles")))?;
        Ok(c as usize)
    }

    /// Per-station choice indices of a profile index (little-endian).
    pub fn choices(&self, mut index: usize) -> Vec<usize> {
        self.stations
            .iter()
            .map(|s| {
                let c = index % s.len();
                index /= s.len();
                c
            })
            .collect()
    }

    pub fn index_of(&self, choices: &[usize]) -> usize {
        let mut idx = 0;
        let mut radix = 1;
        for (c, s) in choices.iter().zip(&self.stations) {
            idx += c * radix;
            radix *= s.len();
        }
        idx
    }

    pub fn profile(&self, index: usize) -> StrategyProfile {
        let choices = self.choices(index);
        let horizon = self.stations.first().map_or(0, |s| s[0].len());
        let tables = (0..horizon)
            .map(|t| choices.iter().enumerate().map(|(k, &c)| self.stations[k][c][t].clone()).collect())
            .collect();
        StrategyProfile { tables }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PbpResult {
    /// Expected cost of every profile, by profile index.
    pub costs: Vec<f64>,
    /// Profiles no single station can improve by deviating.
    pub person_by_person: Vec<usize>,
    pub global: Vec<usize>,
    pub global_cost: f64,
}

impl PbpResult {
    pub fn global_within_pbp(&self) -> bool {
        self.global.iter().all(|g| self.person_by_person.binary_search(g).is_ok())
    }
}

/// Exhaustive person-by-person and global optimality over `space`.
pub fn brute_force_pbp(model: &FiniteTeamModel, space: &StrategySpace) -> Result<PbpResult> {
    if space.stations.len() != model.stations() {
        return Err(config("strategy space and model disagree on the number of stations"));
    }
    let total = space.profile_count()?;
    let costs: Vec<f64> = (0..total)
        .map(|i| expected_cost(model, &space.profile(i)))
        .collect::<Result<_>>()?;
    let slack = |j: f64| 1e-12 * (1.0 + j.abs());
    let global_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let global = (0..total).filter(|&i| costs[i] <= global_cost + slack(global_cost)).collect();
    let person_by_person = (0..total)
        .filter(|&i| {
            let base = space.choices(i);
            (0..base.len()).all(|k| {
                (0..space.stations[k].len()).all(|alt| {
                    let mut c = base.clone();
                    c[k] = alt;
                    costs[space.index_of(&c)] >= costs[i] - slack(costs[i])
                })
            })
        })
        .collect();
    Ok(PbpResult { costs, person_by_person, global, global_cost })
}
