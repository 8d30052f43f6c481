//! Linear versus staircase regimes: solve at three parameter sets and classify γ̄₁.

use witsenhausen::counterexample::{affine_optimal, payoff_quadrature, ProblemParams};
use witsenhausen::ghq_solver::{solve_signaling_levels, solved_pair, InitTag};
use witsenhausen::quadrature::build_hermite_rule;
use witsenhausen::staircase::detect;

fn main() -> witsenhausen::Result<()> {
    let rule = build_hermite_rule(7)?;
    let outer = build_hermite_rule(20)?;
    let inner = build_hermite_rule(64)?;
    for (k, sigma, sigma_x, half) in [(0.05, 5.0, 2.0, 4.0), (0.005, 0.01, 2.0, 8.0), (0.05, 0.04, 2.0, 8.0)] {
        let params = ProblemParams::gaussian(k, sigma, sigma_x)?;
        let affine = payoff_quadrature(&params, &affine_optimal(&params)?, &outer, &inner)?.total;
        let report = solve_signaling_levels(&params, &rule, InitTag::Auto, 1e-12)?;
        let pair = solved_pair(&report, &rule)?;
        let solved = payoff_quadrature(&params, &pair, &outer, &inner)?.total;
        let xs: Vec<f64> = (0..2001).map(|i| -half + 2.0 * half * i as f64 / 2000.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| pair.gamma1bar(x)).collect();
        let s = detect(&xs, &ys);
        let kind = if s.is_linear { "linear".to_string() } else { format!("{}-step staircase", s.steps) };
        println!(
            "k={k:<6} σ={sigma:<5} σx={sigma_x}: affine {affine:.4e}, solved {solved:.4e} ({} start), γ̄₁ {kind}",
            report.init.label()
        );
    }
    Ok(())
}
