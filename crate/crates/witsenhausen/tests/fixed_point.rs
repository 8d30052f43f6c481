use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use witsenhausen::counterexample::{ProblemParams, StrategyPair};
use witsenhausen::fixed_point::{
    apply_f, apply_f_pair, default_grid, frechet_kernel, lipschitz_estimate, merge_grid, picard_iterate,
    printed_frechet_kernel, FrechetPoint, GridStrategy,
};
use witsenhausen::ghq_solver::{collocation_points, solve_signaling_levels, solved_pair, InitTag};
use witsenhausen::quadrature::{build_hermite_rule, QuadratureRule};

fn smooth_pair() -> StrategyPair {
    StrategyPair::custom(|x| 3.0 * (x / 2.0).tanh() + 0.3 * x, |y| 0.8 * (0.5 * y).tanh() + 0.1 * y)
}

fn setup() -> (ProblemParams, QuadratureRule, GridStrategy) {
    let p = ProblemParams::gaussian(0.7, 1.2, 2.0).unwrap();
    let rule = build_hermite_rule(9).unwrap();
    let grid = merge_grid(&default_grid(&p), &collocation_points(&p, &rule));
    let s = GridStrategy::from_pair(&smooth_pair(), grid).unwrap();
    (p, rule, s)
}

/// `f₁` written out directly.
fn f1(p: &ProblemParams, g: f64, c: f64, zeta: f64) -> f64 {
    let s2 = p.sigma * p.sigma;
    let pdf = (-(zeta - g).powi(2) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
    -((zeta - g) * (g - c).powi(2) / (2.0 * s2) + (g - c)) * pdf / (p.k * p.k)
}

/// `f₂(v + h e_j) − f₂(v − h e_j)` written as `(ΔN·D − N·ΔD)/(D₊D₋)` so that a
/// node with negligible weight does not vanish in cancellation.
fn f2_node_difference(p: &ProblemParams, probs: &[f64], vals: &[f64], j: usize, y: f64, h: f64) -> f64 {
    let e = |v: f64| (-(y - v).powi(2) / (2.0 * p.sigma * p.sigma)).exp();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (w, v)) in probs.iter().zip(vals).enumerate() {
        if i != j {
            num += w * v * e(*v);
            den += w * e(*v);
        }
    }
    let v = vals[j];
    let (np, dp) = (probs[j] * (v + h) * e(v + h), probs[j] * e(v + h));
    let (nm, dm) = (probs[j] * (v - h) * e(v - h), probs[j] * e(v - h));
    let (dn, dd) = (np - nm, dp - dm);
    // (N+np)/(D+dp) − (N+nm)/(D+dm)
    (dn * (den + dm) - (num + nm) * dd) / ((den + dp) * (den + dm))
}

fn close(k: f64, fd: f64) -> bool {
    (k - fd).abs() <= 1e-5 * fd.abs() + 1e-12
}

#[test]
fn kernels_match_finite_differences() {
    let (p, rule, s) = setup();
    let nodes = collocation_points(&p, &rule);
    let probs: Vec<f64> = rule.weights().iter().map(|w| w / std::f64::consts::PI.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut printed_mismatch = 0;
    for _ in 0..100 {
        let x0 = rng.random_range(-3.0 * p.sigma_x..3.0 * p.sigma_x);
        let g = s.gamma1bar(x0);
        let zeta = g + p.sigma * rng.sample::<f64, _>(StandardNormal);
        let j = rng.random_range(0..nodes.len());
        let y1 = rng.random_range(-8.0..8.0);
        let at = FrechetPoint { x0, zeta, xi: nodes[j], y1 };
        let k = frechet_kernel(&s, &p, &rule, at).unwrap();

        let c = s.gamma2(zeta);
        let h = 1e-5;
        let fd_g = (f1(&p, g + h, c, zeta) - f1(&p, g - h, c, zeta)) / (2.0 * h);
        let fd_c = (f1(&p, g, c + h, zeta) - f1(&p, g, c - h, zeta)) / (2.0 * h);
        assert!(close(k.d1_gamma1bar, fd_g), "∂f₁/∂γ̄₁ at {at:?}: {} vs {fd_g}", k.d1_gamma1bar);
        assert!(close(k.d1_gamma2, fd_c), "∂f₁/∂γ₂ at {at:?}: {} vs {fd_c}", k.d1_gamma2);

        let vals: Vec<f64> = nodes.iter().map(|&x| s.gamma1bar(x)).collect();
        let fd_2 = f2_node_difference(&p, &probs, &vals, j, y1, h) / (2.0 * h) / probs[j];
        assert!(close(k.d2_gamma1bar, fd_2), "∂f₂/∂γ̄₁ at {at:?}: {} vs {fd_2}", k.d2_gamma1bar);
        assert_eq!(k.d2_gamma2, 0.0);

        let pk = printed_frechet_kernel(&s, &p, &rule, at).unwrap();
        if !close(pk.d1_gamma1bar, fd_g) || !close(pk.d2_gamma1bar, fd_2) {
            printed_mismatch += 1;
        }
    }
    assert!(printed_mismatch > 50, "printed kernels agreed at {} points", 100 - printed_mismatch);
}

#[test]
fn operator_preserves_odd_symmetry() {
    let (p, rule, s) = setup();
    let f = apply_f(&s, &p, &rule).unwrap();
    let n = f.grid().len();
    for i in 0..n {
        assert_eq!(f.grid()[i], -f.grid()[n - 1 - i]);
        assert!((f.values1()[i] + f.values1()[n - 1 - i]).abs() < 1e-12);
        assert!((f.values2()[i] + f.values2()[n - 1 - i]).abs() < 1e-12);
    }
}

#[test]
fn picard_contracts_for_large_k() {
    let p = ProblemParams::gaussian(5.0, 1.0, 1.0).unwrap();
    let rule = build_hermite_rule(7).unwrap();
    let init = GridStrategy::zeros(default_grid(&p)).unwrap();
    let r = picard_iterate(&init, &p, &rule, 0.5, 500, 1e-10).unwrap();
    assert!(r.converged && !r.diverged);
    assert!(r.monotone_decay());
    assert!(lipschitz_estimate(&r.strategy, &p, &rule, 20).unwrap() < 1.0);
    assert!(picard_iterate(&init, &p, &rule, 0.0, 10, 1e-10).is_err());
    assert!(picard_iterate(&init, &p, &rule, 1.5, 10, 1e-10).is_err());
}

#[test]
fn collocation_solution_is_a_fixed_point() {
    let p = ProblemParams::gaussian(0.2, 1.0, 5.0).unwrap();
    let rule = build_hermite_rule(7).unwrap();
    let r = solve_signaling_levels(&p, &rule, InitTag::quantizer(), 1e-12).unwrap();
    let pair = solved_pair(&r, &rule).unwrap();
    let grid = merge_grid(&default_grid(&p), &collocation_points(&p, &rule));
    let s = GridStrategy::from_pair(&pair, grid.clone()).unwrap();
    let f = apply_f_pair(&pair, grid, &p, &rule).unwrap();
    assert!(f.sup_distance(&s) < 1e-6, "{}", f.sup_distance(&s));
}

#[test]
fn grid_validation() {
    assert!(GridStrategy::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
    assert!(GridStrategy::new(vec![0.0, 1.0], vec![1.0], vec![1.0, 1.0]).is_err());
    let s = GridStrategy::new(vec![0.0, 1.0], vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
    assert_eq!(s.gamma1bar(0.25), 0.5);
    assert_eq!(s.gamma1bar(-3.0), 0.0);
    assert_eq!(s.gamma1bar(3.0), 2.0);
}
