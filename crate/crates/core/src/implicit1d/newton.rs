use super::{check_input, supersolution_bound, ImplicitStepParams, ResidualWorkspace};
use crate::error::{Error, Result};
use crate::growth::Rates;
use crate::law::PressureLaw;
use crate::linalg::thomas_in_place;
use crate::mesh::Field;

/// Converged Newton iterate and the work it took.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub n: Field,
    pub iterations: usize,
    pub residual: f64,
}

/// Smallest damping factor tried by the line search.
const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// Projected Newton iteration for one implicit step.
///
/// The Jacobian is tridiagonal: row `i` couples `N_{i-1}` through
/// `nu * d1A_{i-1/2}` and `N_{i+1}` through `-nu * d2A_{i+1/2}`. Every
/// trial iterate is clipped to `[0, n_bar]`, `n_bar` the supersolution
/// bound, and the step is halved until the residual max-norm decreases.
pub fn solve_step_newton(
    n_curr: &[f64],
    params: &ImplicitStepParams,
    law: &PressureLaw,
    rates: Rates<'_>,
) -> Result<NewtonReport> {
    check_input(n_curr)?;
    let len = n_curr.len();
    let cap = supersolution_bound(n_curr, params, law, rates)?;
    let mut x: Vec<f64> = n_curr.iter().map(|&v| v.clamp(0.0, cap)).collect();
    let mut ws = ResidualWorkspace::new(len);
    let mut trial_ws = ResidualWorkspace::new(len);
    ws.evaluate(&x, n_curr, params, law, rates);
    let mut norm = ws.max_norm();

    let mut lower = vec![0.0; len];
    let mut diag = vec![0.0; len];
    let mut upper = vec![0.0; len];
    let mut rhs = vec![0.0; len];
    let mut scratch = vec![0.0; len];
    let mut delta = vec![0.0; len];
    let mut trial = vec![0.0; len];

    for iteration in 0..params.newton_max_iter {
        if norm <= params.newton_tol {
            return Ok(NewtonReport {
                n: x.into(),
                iterations: iteration,
                residual: norm,
            });
        }
        for i in 0..len {
            let g = rates.at(i, ws.p[i]);
            let dg = rates.dp(ws.p[i]);
            let mut d = 1.0 - params.dt * g - params.dt * dg * ws.dp[i] * x[i];
            lower[i] = 0.0;
            upper[i] = 0.0;
            if i + 1 < len {
                let f = ws.faces[i];
                d -= params.nu * f.partial_1;
                upper[i] = -params.nu * f.partial_2;
            }
            if i > 0 {
                let f = ws.faces[i - 1];
                d += params.nu * f.partial_2;
                lower[i] = params.nu * f.partial_1;
            }
            diag[i] = d;
            rhs[i] = -ws.r[i];
        }
        thomas_in_place(&lower, &diag, &upper, &rhs, &mut scratch, &mut delta)?;

        let mut lambda = 1.0;
        loop {
            for i in 0..len {
                trial[i] = (x[i] + lambda * delta[i]).clamp(0.0, cap);
            }
            trial_ws.evaluate(&trial, n_curr, params, law, rates);
            let trial_norm = trial_ws.max_norm();
            if trial_norm < (1.0 - 1e-4 * lambda) * norm || trial_norm <= params.newton_tol {
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut ws, &mut trial_ws);
                norm = trial_norm;
                break;
            }
            lambda *= 0.5;
            if lambda < MIN_DAMPING {
                return Err(Error::NewtonDiverged {
                    iterations: iteration + 1,
                    residual: norm,
                    iterate: x,
                });
            }
        }
    }
    if norm <= params.newton_tol {
        return Ok(NewtonReport {
            n: x.into(),
            iterations: params.newton_max_iter,
            residual: norm,
        });
    }
    Err(Error::NewtonDiverged {
        iterations: params.newton_max_iter,
        residual: norm,
        iterate: x,
    })
}
