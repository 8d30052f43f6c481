//! Affine and sign/tanh baseline strategies with both payoff estimators.

use witsenhausen::counterexample::{
    affine_cost, affine_optimal, payoff_mc, payoff_quadrature, wit_nonlinear, ProblemParams, StrategyPair,
};
use witsenhausen::quadrature::build_hermite_rule;

fn main() -> witsenhausen::Result<()> {
    let outer = build_hermite_rule(20)?;
    let inner = build_hermite_rule(64)?;
    for (k, sigma, sigma_x) in [(1.0, 1.0, 1.0), (0.2, 1.0, 5.0), (0.05, 5.0, 2.0)] {
        let params = ProblemParams::gaussian(k, sigma, sigma_x)?;
        let affine = affine_optimal(&params)?;
        let StrategyPair::Affine { lambda, mu } = affine else { unreachable!() };
        let (s1, s2) = affine_cost(&params, lambda, mu);
        let q = payoff_quadrature(&params, &affine, &outer, &inner)?;
        println!("k={k} σ={sigma} σx={sigma_x}");
        println!("  affine  λ={lambda:.6} μ={mu:.6}  closed form {:.9}  quadrature {:.9}", s1 + s2, q.total);

        let wit = wit_nonlinear(&params);
        let q = payoff_quadrature(&params, &wit, &outer, &inner)?;
        let mc = payoff_mc(&params, &wit, 200_000, 0)?;
        println!(
            "  sign/tanh  quadrature {:.9}  Monte Carlo {:.6} ± {:.6}",
            q.total,
            mc.total,
            mc.std_error.unwrap_or(0.0)
        );
    }
    Ok(())
}
