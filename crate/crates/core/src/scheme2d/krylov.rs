//! Newton with a Jacobi-preconditioned BiCGSTAB inner solve, for grids too
//! large for the banded factorization.

use super::Workspace2D;
use crate::error::{Error, Result};
use crate::growth::Rates;
use crate::implicit1d::ImplicitStepParams;
use crate::law::PressureLaw;
use crate::par::{self, Execution};

/// Five-point operator: `(A x)_k = c_k x_k + w_k x_{k-1} + e_k x_{k+1} + s_k x_{k-side} + n_k x_{k+side}`.
#[derive(Clone, Debug)]
pub struct FivePoint {
    pub side: usize,
    pub c: Vec<f64>,
    pub w: Vec<f64>,
    pub e: Vec<f64>,
    pub s: Vec<f64>,
    pub n: Vec<f64>,
}

impl FivePoint {
    pub fn zeros(side: usize) -> Self {
        let len = side * side;
        Self {
            side,
            c: vec![0.0; len],
            w: vec![0.0; len],
            e: vec![0.0; len],
            s: vec![0.0; len],
            n: vec![0.0; len],
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64], exec: Execution) {
        let side = self.side;
        par::for_each_row(exec, out, side, |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                let k = j * side + i;
                let mut acc = self.c[k] * x[k];
                if i > 0 {
                    acc += self.w[k] * x[k - 1];
                }
                if i + 1 < side {
                    acc += self.e[k] * x[k + 1];
                }
                if j > 0 {
                    acc += self.s[k] * x[k - side];
                }
                if j + 1 < side {
                    acc += self.n[k] * x[k + side];
                }
                *v = acc;
            }
        });
    }
}

fn dot(a: &[f64], b: &[f64], side: usize, exec: Execution) -> f64 {
    par::row_sum(exec, side, |j| {
        let r = j * side..(j + 1) * side;
        a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum()
    })
}

/// Solves `A x = b` to relative residual `rel_tol` (2-norm), starting from 0.
/// Returns the solution and the iteration count.
pub fn bicgstab(a: &FivePoint, b: &[f64], rel_tol: f64, max_iter: usize, exec: Execution) -> Result<(Vec<f64>, usize)> {
    let len = b.len();
    let side = a.side;
    let inv_diag: Vec<f64> = a.c.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; len];
    let mut r = b.to_vec();
    let b_norm = dot(b, b, side, exec).sqrt();
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; len];
    let mut p = vec![0.0; len];
    let mut y = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut t = vec![0.0; len];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r, side, exec);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::Singular { row: it });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..len {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
            y[k] = inv_diag[k] * p[k];
        }
        a.apply(&y, &mut v, exec);
        let denom = dot(&r_hat, &v, side, exec);
        if denom == 0.0 {
            return Err(Error::Singular { row: it });
        }
        alpha = rho / denom;
        for k in 0..len {
            x[k] += alpha * y[k];
            r[k] -= alpha * v[k];
        }
        if dot(&r, &r, side, exec).sqrt() <= rel_tol * b_norm {
            return Ok((x, it));
        }
        for k in 0..len {
            z[k] = inv_diag[k] * r[k];
        }
        a.apply(&z, &mut t, exec);
        let tt = dot(&t, &t, side, exec);
        omega = if tt > 0.0 { dot(&t, &r, side, exec) / tt } else { 0.0 };
        for k in 0..len {
            x[k] += omega * z[k];
            r[k] -= omega * t[k];
        }
        if dot(&r, &r, side, exec).sqrt() <= rel_tol * b_norm {
            return Ok((x, it));
        }
    }
    Err(Error::NewtonDiverged {
        iterations: max_iter,
        residual: dot(&r, &r, side, exec).sqrt() / b_norm,
        iterate: x,
    })
}

/// Relative tolerance of the inner linear solves.
const INNER_TOL: f64 = 1e-6;
const INNER_MAX_ITER: usize = 2000;

pub(super) fn newton_krylov(
    n_curr: &[f64],
    side: usize,
    params: &ImplicitStepParams,
    law: &PressureLaw,
    rates: Rates<'_>,
) -> Result<Vec<f64>> {
    let len = n_curr.len();
    let exec = params.exec;
    let cap = crate::implicit1d::supersolution_bound(n_curr, params, law, rates)?;
    let mut x: Vec<f64> = n_curr.iter().map(|&v| v.clamp(0.0, cap)).collect();
    let mut ws = Workspace2D::new(side);
    let mut trial_ws = Workspace2D::new(side);
    ws.evaluate(side, &x, n_curr, params, law, rates, exec);
    let mut norm = ws.max_norm();
    let mut jac = FivePoint::zeros(side);
    let mut trial = vec![0.0; len];
    let nu = params.nu;
    for iteration in 0..params.newton_max_iter {
        if norm <= params.newton_tol {
            return Ok(x);
        }
        for k in 0..len {
            let g = rates.at(k, ws.p[k]);
            let dg = rates.dp(ws.p[k]);
            jac.c[k] = 1.0 - params.dt * g - params.dt * dg * ws.dp[k] * x[k];
            jac.w[k] = 0.0;
            jac.e[k] = 0.0;
            jac.s[k] = 0.0;
            jac.n[k] = 0.0;
        }
        for j in 0..side {
            for i in 0..side - 1 {
                let (a, b) = (j * side + i, j * side + i + 1);
                let f = ws.fx[j * (side - 1) + i];
                jac.c[a] -= nu * f.partial_1;
                jac.e[a] -= nu * f.partial_2;
                jac.w[b] += nu * f.partial_1;
                jac.c[b] += nu * f.partial_2;
            }
        }
        for j in 0..side - 1 {
            for i in 0..side {
                let (a, b) = (j * side + i, (j + 1) * side + i);
                let f = ws.fy[j * side + i];
                jac.c[a] -= nu * f.partial_1;
                jac.n[a] -= nu * f.partial_2;
                jac.s[b] += nu * f.partial_1;
                jac.c[b] += nu * f.partial_2;
            }
        }
        let rhs: Vec<f64> = ws.r.iter().map(|v| -v).collect();
        let (delta, _) = bicgstab(&jac, &rhs, INNER_TOL, INNER_MAX_ITER, exec)?;
        let mut lambda = 1.0;
        loop {
            for k in 0..len {
                trial[k] = (x[k] + lambda * delta[k]).clamp(0.0, cap);
            }
            trial_ws.evaluate(side, &trial, n_curr, params, law, rates, exec);
            let trial_norm = trial_ws.max_norm();
            if trial_norm < (1.0 - 1e-4 * lambda) * norm || trial_norm <= params.newton_tol {
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut ws, &mut trial_ws);
                norm = trial_norm;
                break;
            }
            lambda *= 0.5;
            if lambda < 1.0 / 1024.0 {
                return Err(Error::NewtonDiverged {
                    iterations: iteration + 1,
                    residual: norm,
                    iterate: x,
                });
            }
        }
    }
    if norm <= params.newton_tol {
        return Ok(x);
    }
    Err(Error::NewtonDiverged {
        iterations: params.newton_max_iter,
        residual: norm,
        iterate: x,
    })
}
