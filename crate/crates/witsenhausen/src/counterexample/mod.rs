//! The two-stage counterexample: `x₁ = γ̄₁(x₀)`, `y₁ = x₁ + v`, `u₂ = γ₂(y₁)`,
//! cost `k²(x₁ − x₀)² + (x₁ − u₂)²`.

mod baseline;
mod payoff;
mod stationarity;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::fixed_point::GridStrategy;
use crate::ghq_solver::CollocationPair;

pub use baseline::{affine_cost, affine_optimal, affine_quintic_law, quintic_real_roots, wit_nonlinear};
pub use payoff::{payoff_mc, payoff_quadrature, Estimator, PayoffBreakdown, MC_CHUNK};
pub use stationarity::{log_rnd_density, rnd_density, stationarity_residual, Stationarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    /// `x₀ ~ N(0, σ_x²)`
    Gaussian,
    /// mass ½ at each of `±σ_x`
    TwoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub k: f64,
    pub sigma: f64,
    pub sigma_x: f64,
    pub prior: Prior,
}

impl ProblemParams {
    pub fn new(k: f64, sigma: f64, sigma_x: f64, prior: Prior) -> Result<Self> {
        for (name, v) in [("k", k), ("sigma", sigma), ("sigma_x", sigma_x)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { k, sigma, sigma_x, prior })
    }

    pub fn gaussian(k: f64, sigma: f64, sigma_x: f64) -> Result<Self> {
        Self::new(k, sigma, sigma_x, Prior::Gaussian)
    }

    pub fn k2(&self) -> f64 {
        self.k * self.k
    }
}

type Map = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied pair of maps. `breakpoints` lists known discontinuities of γ̄₁.
#[derive(Clone)]
pub struct CustomPair {
    pub gamma1bar: Map,
    pub gamma2: Map,
    pub breakpoints: Vec<f64>,
}

#[derive(Clone)]
pub enum StrategyPair {
    Affine { lambda: f64, mu: f64 },
    /// `γ̄₁ = σ_x sgn(x₀)`, `γ₂ = σ_x tanh(σ_x y₁ / σ²)`
    WitNonlinear { sigma_x: f64, sigma: f64 },
    Collocation(Arc<CollocationPair>),
    Grid(Arc<GridStrategy>),
    Custom(CustomPair),
}

impl fmt::Debug for StrategyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Affine { lambda, mu } => write!(f, "Affine {{ lambda: {lambda}, mu: {mu} }}"),
            Self::WitNonlinear { sigma_x, sigma } => {
                write!(f, "WitNonlinear {{ sigma_x: {sigma_x}, sigma: {sigma} }}")
            }
            Self::Collocation(c) => write!(f, "Collocation({:?})", c.levels().values),
            Self::Grid(g) => write!(f, "Grid({} points)", g.grid().len()),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Affine,
    WitNonlinear,
    Collocation,
    Grid,
    Custom,
}

impl StrategyPair {
    pub fn custom<F, G>(gamma1bar: F, gamma2: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::Custom(CustomPair { gamma1bar: Arc::new(gamma1bar), gamma2: Arc::new(gamma2), breakpoints: vec![] })
    }

    pub fn representation(&self) -> Representation {
        match self {
            Self::Affine { .. } => Representation::Affine,
            Self::WitNonlinear { .. } => Representation::WitNonlinear,
            Self::Collocation(_) => Representation::Collocation,
            Self::Grid(_) => Representation::Grid,
            Self::Custom(_) => Representation::Custom,
        }
    }

    /// First-stage map `x₀ ↦ x₁`. Returns NaN if a collocation root search fails.
    pub fn gamma1bar(&self, x0: f64) -> f64 {
        match self {
            Self::Affine { lambda, .. } => lambda * x0,
            Self::WitNonlinear { sigma_x, .. } => {
                if x0 > 0.0 {
                    *sigma_x
                } else if x0 < 0.0 {
                    -sigma_x
                } else {
                    0.0
                }
            }
            Self::Collocation(c) => c.gamma1bar(x0).unwrap_or(f64::NAN),
            Self::Grid(g) => g.gamma1bar(x0),
            Self::Custom(c) => (c.gamma1bar)(x0),
        }
    }

    /// Second-stage map `y₁ ↦ u₂`.
    pub fn gamma2(&self, y1: f64) -> f64 {
        match self {
            Self::Affine { mu, .. } => mu * y1,
            Self::WitNonlinear { sigma_x, sigma } => sigma_x * (sigma_x * y1 / (sigma * sigma)).tanh(),
            Self::Collocation(c) => c.gamma2(y1),
            Self::Grid(g) => g.gamma2(y1),
            Self::Custom(c) => (c.gamma2)(y1),
        }
    }

    /// `γ₁(x₀) = γ̄₁(x₀) − x₀`, the first controller's action.
    pub fn gamma1(&self, x0: f64) -> f64 {
        self.gamma1bar(x0) - x0
    }

    /// Points where γ̄₁ jumps; quadrature splits the outer integral there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Affine { .. } | Self::Grid(_) => vec![],
            Self::WitNonlinear { .. } => vec![0.0],
            Self::Collocation(c) => c.breakpoints().to_vec(),
            Self::Custom(c) => c.breakpoints.clone(),
        }
    }

    /// Replaces γ₂, keeping γ̄₁ and its breakpoints.
    pub fn with_gamma2<G>(&self, gamma2: G) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let me = self.clone();
        let breakpoints = self.breakpoints();
        Self::Custom(CustomPair { gamma1bar: Arc::new(move |x| me.gamma1bar(x)), gamma2: Arc::new(gamma2), breakpoints })
    }
}
