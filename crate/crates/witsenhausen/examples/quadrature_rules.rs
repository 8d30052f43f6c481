//! Gauss–Hermite rules and their polynomial exactness.

use witsenhausen::quadrature::build_hermite_rule;

fn main() -> witsenhausen::Result<()> {
    let rule = build_hermite_rule(7)?;
    println!("order 7 nodes and weights:");
    for (z, w) in rule.iter() {
        println!("  {z:+.15}  {w:.15e}");
    }

    // ∫ z^{2j} e^{-z²} dz = Γ(j + ½)
    println!("\neven moments, rule vs closed form:");
    let mut exact = std::f64::consts::PI.sqrt();
    for j in 0..8 {
        let got = rule.integrate(|z| z.powi(2 * j))?;
        println!("  z^{:<2} {got:.15e}  {exact:.15e}", 2 * j);
        exact *= j as f64 + 0.5;
    }
    println!("(degrees up to 13 are exact for n = 7)");

    // E[cos X], X ~ N(0, 1), is e^{-1/2}
    for n in [3, 7, 15, 30] {
        let r = build_hermite_rule(n)?;
        let e = r.integrate(|z| (std::f64::consts::SQRT_2 * z).cos())? / std::f64::consts::PI.sqrt();
        println!("n = {n:2}: E[cos X] = {e:.15}  error {:.1e}", (e - (-0.5f64).exp()).abs());
    }
    Ok(())
}
