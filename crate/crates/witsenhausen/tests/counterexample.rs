use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use witsenhausen::counterexample::{
    affine_cost, affine_optimal, log_rnd_density, payoff_mc, payoff_quadrature, quintic_real_roots, rnd_density,
    stationarity_residual, wit_nonlinear, Prior, ProblemParams, StrategyPair,
};
use witsenhausen::quadrature::build_hermite_rule;

fn gains(p: &StrategyPair) -> (f64, f64) {
    match p {
        StrategyPair::Affine { lambda, mu } => (*lambda, *mu),
        other => panic!("not affine: {other:?}"),
    }
}

/// Closed-form affine cost with the MMSE second stage, minimised by golden section
/// on a fine bracket found by scanning.
fn affine_oracle(k: f64, sigma: f64, sx: f64) -> (f64, f64) {
    let cost = |l: f64| {
        let a = l * l * sx * sx;
        let mu = a / (a + sigma * sigma);
        k * k * (l - 1.0).powi(2) * sx * sx + (l * (1.0 - mu)).powi(2) * sx * sx + mu * mu * sigma * sigma
    };
    let n = 200_000;
    let (mut best, mut arg) = (f64::INFINITY, 0.0);
    for i in 0..=n {
        let l = i as f64 / n as f64;
        if cost(l) < best {
            best = cost(l);
            arg = l;
        }
    }
    let (mut a, mut b) = ((arg - 1.0 / n as f64).max(0.0), (arg + 1.0 / n as f64).min(1.0));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let l = 0.5 * (a + b);
    (l, cost(l))
}

#[test]
fn affine_optimum_matches_scan() {
    for &(k, sigma, sx) in &[(1.0, 1.0, 1.0), (0.2, 1.0, 5.0), (0.05, 5.0, 2.0), (0.5, 0.3, 1.5), (0.05, 0.04, 2.0)] {
        let p = ProblemParams::gaussian(k, sigma, sx).unwrap();
        let (l, mu) = gains(&affine_optimal(&p).unwrap());
        let (_, best) = affine_oracle(k, sigma, sx);
        let (a, b) = affine_cost(&p, l, mu);
        assert!(a + b <= best + 1e-12, "k={k} σ={sigma} σx={sx}: {} vs {best}", a + b);
        assert!((a + b - best).abs() < 1e-10);
    }
}

#[test]
fn unit_case_affine_cost() {
    // mpmath, 30 digits: J = 0.418587820..., λ = 0.682327803828019...
    let p = ProblemParams::gaussian(1.0, 1.0, 1.0).unwrap();
    let pair = affine_optimal(&p).unwrap();
    let q = payoff_quadrature(&p, &pair, &build_hermite_rule(20).unwrap(), &build_hermite_rule(20).unwrap()).unwrap();
    let (_, oracle) = affine_oracle(1.0, 1.0, 1.0);
    assert!((q.total - oracle).abs() < 1e-12);
    assert!((q.total - 0.41858782).abs() < 1e-8);
}

#[test]
fn quintic_roots_are_roots() {
    for &(k, sx) in &[(1.0, 1.0), (0.2, 5.0), (0.05, 2.0), (0.005, 2.0), (3.0, 0.2)] {
        for t in quintic_real_roots(k, sx).unwrap() {
            let v = (t - sx) * (1.0 + t * t).powi(2) + t / (k * k);
            let scale = sx * (1.0 + t * t).powi(2) + (t / (k * k)).abs();
            assert!(v.abs() < 1e-12 * scale, "k={k} σx={sx} t={t}: {v}");
        }
    }
}

#[test]
fn affine_quadrature_equals_closed_form() {
    for &(k, sigma, sx) in &[(1.0, 1.0, 1.0), (0.2, 1.0, 5.0), (0.3, 2.0, 0.7)] {
        let p = ProblemParams::gaussian(k, sigma, sx).unwrap();
        let pair = StrategyPair::Affine { lambda: 0.37, mu: 0.81 };
        let (a, b) = affine_cost(&p, 0.37, 0.81);
        let r = build_hermite_rule(10).unwrap();
        let q = payoff_quadrature(&p, &pair, &r, &r).unwrap();
        assert!((q.stage1 - a).abs() < 1e-12 * (1.0 + a));
        assert!((q.stage2 - b).abs() < 1e-12 * (1.0 + b));
        assert_eq!(q.total, q.stage1 + q.stage2);
    }
}

/// Sign/tanh pair: stage 1 is k²σx²(2 − 2√(2/π)); stage 2 is a 1-D integral over v.
fn wit_oracle(k: f64, sigma: f64, sx: f64) -> (f64, f64) {
    let s1 = k * k * sx * sx * (2.0 - 2.0 * (2.0 / std::f64::consts::PI).sqrt());
    let n = 400_000;
    let lim = 12.0 * sigma;
    let h = 2.0 * lim / n as f64;
    let mut s2 = 0.0;
    for i in 0..=n {
        let v = -lim + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let d = sx - sx * (sx * (sx + v) / (sigma * sigma)).tanh();
        s2 += w * d * d * (-v * v / (2.0 * sigma * sigma)).exp();
    }
    (s1, s2 * h / ((2.0 * std::f64::consts::PI).sqrt() * sigma))
}

#[test]
fn wit_quadrature_matches_oracle() {
    for &(k, sigma, sx) in &[(0.2, 1.0, 5.0), (1.0, 1.0, 1.0)] {
        let p = ProblemParams::gaussian(k, sigma, sx).unwrap();
        let q = payoff_quadrature(&p, &wit_nonlinear(&p), &build_hermite_rule(20).unwrap(), &build_hermite_rule(64).unwrap())
            .unwrap();
        let (a, b) = wit_oracle(k, sigma, sx);
        assert!((q.stage1 - a).abs() < 1e-10, "{} vs {a}", q.stage1);
        assert!((q.stage2 - b).abs() < 1e-6, "{} vs {b}", q.stage2);
    }
}

#[test]
fn benchmark_wit_value() {
    let p = ProblemParams::gaussian(0.2, 1.0, 5.0).unwrap();
    let (a, b) = wit_oracle(0.2, 1.0, 5.0);
    assert!((a + b - 0.4042528).abs() < 1e-6, "{}", a + b);
    let mc = payoff_mc(&p, &wit_nonlinear(&p), 600_000, 0).unwrap();
    let se = mc.std_error.unwrap();
    assert!((mc.total - (a + b)).abs() < 4.0 * se);
}

#[test]
fn two_point_prior_is_exact_sum() {
    let p = ProblemParams::new(0.5, 1.0, 2.0, Prior::TwoPoint).unwrap();
    let pair = StrategyPair::Affine { lambda: 0.8, mu: 0.5 };
    let r = build_hermite_rule(16).unwrap();
    let q = payoff_quadrature(&p, &pair, &r, &r).unwrap();
    // x₀ = ±2 → x₁ = ±1.6; stage 2 = E(x₁ − ½(x₁ + v))² = ¼(x₁² + σ²)
    assert!((q.stage1 - 0.25 * 0.16).abs() < 1e-14);
    assert!((q.stage2 - 0.25 * (1.6 * 1.6 + 1.0)).abs() < 1e-13);
}

#[test]
fn monte_carlo_against_independent_sampler() {
    let p = ProblemParams::gaussian(0.6, 0.8, 1.7).unwrap();
    let (l, mu) = (0.7, 0.6);
    let pair = StrategyPair::Affine { lambda: l, mu };
    let mc = payoff_mc(&p, &pair, 200_000, 11).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let n = 200_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let x0: f64 = 1.7 * rng.sample::<f64, _>(StandardNormal);
        let v: f64 = 0.8 * rng.sample::<f64, _>(StandardNormal);
        let x1 = l * x0;
        let u = mu * (x1 + v);
        acc += 0.36 * (x1 - x0).powi(2) + (x1 - u).powi(2);
    }
    let oracle = acc / n as f64;
    let se = mc.std_error.unwrap();
    assert!((mc.total - oracle).abs() < 6.0 * se, "{} vs {oracle} (se {se})", mc.total);
    let (a, b) = affine_cost(&p, l, mu);
    assert!((mc.total - (a + b)).abs() < 4.0 * se);
}

#[test]
fn monte_carlo_is_thread_count_independent() {
    let p = ProblemParams::gaussian(0.2, 1.0, 5.0).unwrap();
    let pair = wit_nonlinear(&p);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| payoff_mc(&p, &pair, 50_000, 3).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.total.to_bits(), b.total.to_bits());
    assert_eq!(a.stage1 + a.stage2, a.total);
    assert!(payoff_mc(&p, &pair, 0, 1).is_err());
}

#[test]
fn density_ratio_matches_gaussian_ratio() {
    let p = ProblemParams::gaussian(0.2, 1.3, 5.0).unwrap();
    let g = |x: f64| 0.9 * x + 0.1;
    for &(x0, y1) in &[(0.0, 0.0), (1.5, -0.4), (-2.0, 3.0)] {
        let pdf = |y: f64, m: f64| (-(y - m) * (y - m) / (2.0 * 1.69)).exp();
        let want = pdf(y1, g(x0)) / pdf(y1, 0.0);
        assert!((rnd_density(&p, g, x0, y1) - want).abs() < 1e-13 * want.max(1.0));
    }
    let huge = log_rnd_density(&p, |x| x, 1e4, 1e4);
    assert!(huge > 700.0);
    assert_eq!(rnd_density(&p, |x| x, 1e4, 1e4), f64::MAX);
}

#[test]
fn affine_optimum_is_stationary_and_perturbation_is_not() {
    let p = ProblemParams::gaussian(1.0, 1.0, 1.0).unwrap();
    let rule = build_hermite_rule(40).unwrap();
    let pair = affine_optimal(&p).unwrap();
    let xs: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.2).collect();
    let st = stationarity_residual(&p, &pair, &rule, &xs, &xs).unwrap();
    assert!(st.max_r1() < 1e-8 && st.max_r2() < 1e-8, "{} {}", st.max_r1(), st.max_r2());
    let (l, mu) = gains(&pair);
    let off = StrategyPair::Affine { lambda: l + 0.3, mu };
    let st = stationarity_residual(&p, &off, &rule, &xs, &xs).unwrap();
    assert!(st.max_r1() >= 0.1 && st.max_r2() >= 0.1);
}

#[test]
fn invalid_parameters_rejected() {
    assert!(ProblemParams::gaussian(0.0, 1.0, 1.0).is_err());
    assert!(ProblemParams::gaussian(1.0, f64::NAN, 1.0).is_err());
    assert!(ProblemParams::gaussian(1.0, 1.0, -2.0).is_err());
    let tp = ProblemParams::new(1.0, 1.0, 1.0, Prior::TwoPoint).unwrap();
    assert!(affine_optimal(&tp).is_err());
}
