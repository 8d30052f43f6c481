//! The integral operator F: Picard iteration in a contracting regime, and a
//! fixed-point check of the collocation solution at the benchmark.

use witsenhausen::counterexample::{affine_optimal, ProblemParams};
use witsenhausen::fixed_point::{
    apply_f, apply_f_pair, default_grid, lipschitz_estimate, merge_grid, picard_iterate, GridStrategy,
};
use witsenhausen::ghq_solver::{collocation_points, solve_signaling_levels, solved_pair, InitTag};
use witsenhausen::quadrature::build_hermite_rule;

fn main() -> witsenhausen::Result<()> {
    let rule = build_hermite_rule(7)?;

    let params = ProblemParams::gaussian(5.0, 1.0, 1.0)?;
    let init = GridStrategy::zeros(default_grid(&params))?;
    let report = picard_iterate(&init, &params, &rule, 0.5, 500, 1e-10)?;
    println!("k = 5: Picard converged {} in {} steps, monotone decay {}", report.converged, report.steps.len(), report.monotone_decay());
    let first: Vec<String> = report.steps.iter().take(5).map(|s| format!("{s:.2e}")).collect();
    println!("  first steps {}", first.join(", "));
    println!("  Lipschitz estimate at the limit {:.3}", lipschitz_estimate(&report.strategy, &params, &rule, 20)?);
    let aff = affine_optimal(&params)?;
    println!("  γ̄₁(1) = {:.6}, affine optimum gives {:.6}", report.strategy.gamma1bar(1.0), aff.gamma1bar(1.0));

    let params = ProblemParams::gaussian(0.2, 1.0, 5.0)?;
    let solved = solve_signaling_levels(&params, &rule, InitTag::quantizer(), 1e-12)?;
    let pair = solved_pair(&solved, &rule)?;
    let x0 = collocation_points(&params, &rule);
    // γ₂ is read at s_l + √2σ z_i, so those abscissas join the grid as well
    let inner: Vec<f64> = solved
        .levels
        .values
        .iter()
        .flat_map(|&s| rule.nodes().iter().map(move |z| s + std::f64::consts::SQRT_2 * params.sigma * z))
        .collect();
    let grid = merge_grid(&merge_grid(&default_grid(&params), &x0), &inner);
    let s = GridStrategy::from_pair(&pair, grid)?;
    let fs = apply_f(&s, &params, &rule)?;
    let gap = x0.iter().map(|&x| (fs.gamma1bar(x) - pair.gamma1bar(x)).abs()).fold(0.0, f64::max);
    println!("benchmark: |F(s) − s| at the collocation points {gap:.1e}");
    let d1 = fs.values1().iter().zip(s.values1()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let d2 = fs.values2().iter().zip(s.values2()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("whole grid, interpolated input: γ̄₁ {d1:.1e}, γ₂ {d2:.1e}");
    let exact = apply_f_pair(&pair, s.grid().to_vec(), &params, &rule)?;
    println!("whole grid, exact input: {:.1e}", exact.sup_distance(&s));
    Ok(())
}
