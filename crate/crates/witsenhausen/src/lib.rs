//! Numerical tools for the Witsenhausen counterexample.
//!
//! * [`quadrature`]: Gauss–Hermite rules.
//! * [`counterexample`]: problem data, baseline strategies, payoff estimators, stationarity residuals.
//! * [`ghq_solver`]: collocation solve for the signaling levels and pointwise strategy evaluation.
//! * [`fixed_point`]: the integral operator, Picard iteration, Fréchet kernels.
//! * [`measure_change`]: exact checks of the change-of-measure identities on finite team models.
//! * [`commands`]: the entry points behind the `witsen` binary.

pub mod commands;
pub mod counterexample;
pub mod error;
pub mod fixed_point;
pub mod ghq_solver;
pub mod lsq;
pub mod measure_change;
pub mod mixture;
pub mod quadrature;
pub mod roots;
pub mod staircase;

pub use error::{Error, Result};
