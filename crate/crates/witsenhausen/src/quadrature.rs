//! Gauss–Hermite rules for `∫ f(x) e^{-x²} dx`, built from the Jacobi matrix
//! of the Hermite recurrence (Golub–Welsch), then Newton-polished and
//! symmetrized so mirrored nodes are exact negatives of each other.
//!
//! A Gauss–Legendre builder on `[-1, 1]` shares the same machinery; payoff
//! integration uses it for panels between strategy discontinuities.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{config, numeric, Result};

pub const MAX_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `Σ λ_i f(z_i)`, failing on the first non-finite evaluation.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut vals = Vec::with_capacity(self.order);
        for (i, &z) in self.nodes.iter().enumerate() {
            let v = f(z);
            if !v.is_finite() {
                return Err(numeric(format!(
                    "integrand is {v} at node {i} (z = {z:e})"
                )));
            }
            vals.push(v * self.weights[i]);
        }
        Ok(symmetric_sum(&vals))
    }
}

/// Free-function form of [`QuadratureRule::integrate`].
pub fn integrate<F: FnMut(f64) -> f64>(rule: &QuadratureRule, f: F) -> Result<f64> {
    rule.integrate(f)
}

/// Sums mirrored pairs first so that negating and reversing the terms
/// negates the result bit-for-bit.
pub fn symmetric_sum(terms: &[f64]) -> f64 {
    let n = terms.len();
    let mut acc = 0.0;
    for i in 0..n / 2 {
        acc += terms[i] + terms[n - 1 - i];
    }
    if n % 2 == 1 {
        acc += terms[n / 2];
    }
    acc
}

pub fn build_hermite_rule(order: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(config(format!(
            "Gauss–Hermite order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let n = order;
    let off: Vec<f64> = (1..n).map(|i| (i as f64 / 2.0).sqrt()).collect();
    let (mut nodes, _) = golub_welsch(&vec![0.0; n], &off, std::f64::consts::PI.sqrt());

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        let (p, pm1) = hermite_orthonormal(n, *x);
        let dp = (2.0 * n as f64).sqrt() * pm1;
        if dp != 0.0 {
            *x -= p / dp;
        }
        let (_, _, sumsq) = hermite_orthonormal_sumsq(n, *x);
        weights.push(1.0 / sumsq);
    }
    symmetrize(&mut nodes, &mut weights);
    Ok(QuadratureRule { order: n, nodes, weights })
}

/// Gauss–Legendre rule on `[-1, 1]` (weight function 1).
pub fn build_legendre_rule(order: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(config(format!(
            "Gauss–Legendre order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let n = order;
    let off: Vec<f64> = (1..n)
        .map(|i| {
            let i = i as f64;
            i / (4.0 * i * i - 1.0).sqrt()
        })
        .collect();
    let (mut nodes, _) = golub_welsch(&vec![0.0; n], &off, 2.0);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        // Newton on P_n, then w = 2 / ((1 - x²) P_n'(x)²)
        let (p, dp) = legendre(n, *x);
        *x -= p / dp;
        let (_, dp) = legendre(n, *x);
        weights.push(2.0 / ((1.0 - *x * *x) * dp * dp));
    }
    symmetrize(&mut nodes, &mut weights);
    Ok(QuadratureRule { order: n, nodes, weights })
}

fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            j[(i, i + 1)] = off[i];
            j[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn symmetrize(nodes: &mut [f64], weights: &mut [f64]) {
    let n = nodes.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
}

/// Orthonormal Hermite functions `(ψ_n(x), ψ_{n-1}(x))` for weight `e^{-x²}`.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64) {
    let (p, pm1, _) = hermite_orthonormal_sumsq(n, x);
    (p, pm1)
}

/// Also returns `Σ_{k<n} ψ_k(x)²`, the reciprocal Christoffel weight.
fn hermite_orthonormal_sumsq(n: usize, x: f64) -> (f64, f64, f64) {
    let mut pm1 = 0.0;
    let mut p = std::f64::consts::PI.powf(-0.25);
    let mut sumsq = 0.0;
    for k in 0..n {
        sumsq += p * p;
        let kf = k as f64;
        let next = x * (2.0 / (kf + 1.0)).sqrt() * p - (kf / (kf + 1.0)).sqrt() * pm1;
        pm1 = p;
        p = next;
    }
    (p, pm1, sumsq)
}

/// Legendre `P_n(x)` and `P_n'(x)`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut pm1 = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * pm1) / (kf + 1.0);
        pm1 = p;
        p = next;
    }
    let dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, dp)
}
