use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FiniteTeamModel, InfoPattern, StrategyProfile};
use crate::error::{config, Result};

/// Sizes and sparsity of a random model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomShape {
    pub horizon: usize,
    pub states: usize,
    pub posts: usize,
    pub obs_size: usize,
    pub stations: usize,
    pub actions: usize,
    /// Cap on the number of items in any `I_t^k`.
    pub max_info_items: usize,
    /// Probability that a kernel entry is zero (at least one entry per row stays positive).
    pub sparsity: f64,
}

impl Default for RandomShape {
    /// Small enough that the full strategy space can be enumerated.
    fn default() -> Self {
        Self { horizon: 3, states: 2, posts: 2, obs_size: 2, stations: 2, actions: 2, max_info_items: 1, sparsity: 0.1 }
    }
}

fn distribution(rng: &mut ChaCha8Rng, len: usize, sparsity: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len)
        .map(|_| if rng.random::<f64>() < sparsity { 0.0 } else { rng.random_range(0.05..1.0) })
        .collect();
    if v.iter().all(|&p| p == 0.0) {
        let i = rng.random_range(0..len);
        v[i] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= s);
    v
}

pub fn random_model(shape: &RandomShape, seed: u64) -> Result<FiniteTeamModel> {
    let RandomShape { horizon: n, states, posts, obs_size, stations, actions, max_info_items, sparsity } = *shape;
    if n == 0 || states == 0 || obs_size == 0 || actions == 0 {
        return Err(config("random model sizes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let joint = actions.pow(stations as u32);
    let row = |rng: &mut ChaCha8Rng, len| distribution(rng, len, sparsity);

    let transition = (0..n - 1)
        .map(|_| (0..states).map(|_| (0..joint).map(|_| row(&mut rng, states)).collect()).collect())
        .collect();
    let observation = (0..n)
        .map(|_| {
            (0..posts)
                .map(|_| (0..states).map(|_| (0..joint).map(|_| row(&mut rng, obs_size)).collect()).collect())
                .collect()
        })
        .collect();
    let state_reference = (0..n).map(|_| distribution(&mut rng, states, 0.0)).collect();
    let obs_reference = (0..n).map(|_| (0..posts).map(|_| distribution(&mut rng, obs_size, 0.0)).collect()).collect();
    let stage_cost = (0..n - 1)
        .map(|_| (0..states).map(|_| (0..joint).map(|_| rng.random::<f64>()).collect()).collect())
        .collect();
    let terminal_cost = (0..states).map(|_| rng.random::<f64>()).collect();
    let information = (0..n)
        .map(|t| {
            (0..stations)
                .map(|_| {
                    let mut items: Vec<(bool, usize, usize)> = (0..t)
                        .flat_map(|tau| {
                            (0..posts).map(move |m| (true, tau, m)).chain((0..stations).map(move |k| (false, tau, k)))
                        })
                        .collect();
                    items.shuffle(&mut rng);
                    let keep = rng.random_range(0..=max_info_items.min(items.len()));
                    items.truncate(keep);
                    items.sort();
                    InfoPattern {
                        observations: items.iter().filter(|i| i.0).map(|i| (i.1, i.2)).collect(),
                        actions: items.iter().filter(|i| !i.0).map(|i| (i.1, i.2)).collect(),
                    }
                })
                .collect()
        })
        .collect();
    let model = FiniteTeamModel {
        horizon: n,
        state_sizes: vec![states; n],
        obs_sizes: vec![vec![obs_size; posts]; n],
        action_sizes: vec![vec![actions; stations]; n],
        transition,
        observation,
        state_reference,
        obs_reference,
        stage_cost,
        terminal_cost,
        information,
    };
    model.validate()?;
    Ok(model)
}

pub fn random_profile(model: &FiniteTeamModel, seed: u64) -> StrategyProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables = (0..model.horizon)
        .map(|t| {
            (0..model.stations())
                .map(|k| (0..model.info_size(t, k)).map(|_| rng.random_range(0..model.action_sizes[t][k])).collect())
                .collect()
        })
        .collect();
    StrategyProfile { tables }
}
