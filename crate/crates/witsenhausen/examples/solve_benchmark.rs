//! Collocation solve at k = 0.2, σ_x = 5, σ = 1 with seven levels, then
//! evaluation of the resulting staircase strategy.

use witsenhausen::counterexample::{payoff_mc, payoff_quadrature, stationarity_residual, ProblemParams};
use witsenhausen::ghq_solver::{
    collocation_points, euclidean_norm, residual_vector, solve_signaling_levels, solved_pair, InitTag,
};
use witsenhausen::quadrature::build_hermite_rule;
use witsenhausen::staircase::detect;

fn main() -> witsenhausen::Result<()> {
    let params = ProblemParams::gaussian(0.2, 1.0, 5.0)?;
    let rule = build_hermite_rule(7)?;

    let report = solve_signaling_levels(&params, &rule, InitTag::quantizer(), 1e-12)?;
    println!("converged {} after {} iterations, residual {:.2e}", report.converged, report.iterations, report.residual_norm);
    println!("levels {:.4?}", report.levels.values);

    let literature = [-19.9, -13.2, -6.5, 0.0, 6.5, 13.2, 19.9];
    println!("residual at rounded literature levels {:.3}", euclidean_norm(&residual_vector(&literature, &params, &rule)));

    let pair = solved_pair(&report, &rule)?;
    println!("jumps of γ̄₁ at {:.3?}", pair.breakpoints());
    let q = payoff_quadrature(&params, &pair, &build_hermite_rule(20)?, &build_hermite_rule(64)?)?;
    let mc = payoff_mc(&params, &pair, 600_000, 0)?;
    println!("cost: quadrature {:.6} (stage 1 {:.6}, stage 2 {:.6})", q.total, q.stage1, q.stage2);
    println!("      Monte Carlo {:.6} ± {:.6}", mc.total, mc.std_error.unwrap_or(0.0));

    let x0 = collocation_points(&params, &rule);
    let st = stationarity_residual(&params, &pair, &rule, &x0, &report.levels.values)?;
    println!("optimality residuals: max|r1| {:.1e}, max|r2| {:.1e}", st.max_r1(), st.max_r2());

    let xs: Vec<f64> = (0..2001).map(|i| -20.0 + 40.0 * i as f64 / 2000.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| pair.gamma1bar(x)).collect();
    let s = detect(&xs, &ys);
    println!("staircase on [-20, 20]: {} steps", s.steps);
    for t in &s.treads {
        println!("  [{:7.3}, {:7.3}] level {:8.4} slope {:.4}", t.x_start, t.x_end, t.level, t.slope);
    }
    Ok(())
}
