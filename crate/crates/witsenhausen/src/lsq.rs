//! Levenberg–Marquardt least squares with a forward-difference Jacobian.
//!
//! Damping follows Nielsen's gain-ratio update with Marquardt (diagonal) scaling,
//! which acts as an implicit trust region.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LsqOptions {
    /// Stop once the Euclidean residual norm is at or below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Forward-difference step is `fd_rel * max(1, |x_j|)`.
    pub fd_rel: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 500, fd_rel: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct LsqOutcome {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], r: &[f64], fd_rel: f64) -> DMatrix<f64> {
    let m = r.len();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = fd_rel * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let step = xp[j] - x[j];
        let rp = f(&xp);
        for i in 0..m {
            jac[(i, j)] = (rp[i] - r[i]) / step;
        }
        xp[j] = x[j];
    }
    jac
}

pub fn levenberg_marquardt<F: Fn(&[f64]) -> Vec<f64>>(f: F, x0: &[f64], opts: LsqOptions) -> LsqOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let mut rn = norm(&r);
    let mut iterations = 0;

    let finish = |x: Vec<f64>, r: Vec<f64>, rn: f64, iterations| LsqOutcome {
        converged: rn.is_finite() && rn <= opts.tol,
        x,
        residual: r,
        residual_norm: rn,
        iterations,
    };
    if !rn.is_finite() || rn <= opts.tol {
        return finish(x, r, rn, 0);
    }

    let mut jac = jacobian(&f, &x, &r, opts.fd_rel);
    let mut a = jac.transpose() * &jac;
    let mut g = jac.transpose() * DVector::from_column_slice(&r);
    let mut mu = 1e-3 * (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max).max(1e-300);
    let mut nu = 2.0;

    while iterations < opts.max_iter {
        iterations += 1;
        let dmax = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
        let mut lhs = a.clone();
        let mut scale = DVector::zeros(n);
        for i in 0..n {
            scale[i] = a[(i, i)].max(1e-12 * dmax).max(1e-300);
            lhs[(i, i)] += mu * scale[i];
        }
        let rhs = -&g;
        let delta = match lhs.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match lhs.lu().solve(&rhs) {
                Some(d) => d,
                None => {
                    mu *= nu;
                    nu *= 2.0;
                    continue;
                }
            },
        };
        let xnorm = norm(&x);
        if delta.norm() <= 1e-16 * (xnorm + 1e-16) {
            break;
        }
        let xn: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
        let rnew = f(&xn);
        let rnew_n = norm(&rnew);
        let predicted = 0.5 * delta.dot(&(mu * scale.component_mul(&delta) - &g));
        let actual = 0.5 * (rn * rn - rnew_n * rnew_n);
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
        if rnew_n.is_finite() && rho > 0.0 {
            x = xn;
            r = rnew;
            rn = rnew_n;
            if rn <= opts.tol {
                break;
            }
            jac = jacobian(&f, &x, &r, opts.fd_rel);
            a = jac.transpose() * &jac;
            g = jac.transpose() * DVector::from_column_slice(&r);
            mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
        } else {
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() || mu > 1e300 {
                break;
            }
        }
    }
    finish(x, r, rn, iterations)
}
