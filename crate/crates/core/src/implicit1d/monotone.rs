use super::{check_input, supersolution_bound, ImplicitStepParams, ResidualWorkspace};
use crate::error::{Error, Result};
use crate::growth::Rates;
use crate::law::PressureLaw;
use crate::mesh::Field;

/// Limits of the super- and subsolution iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct Brackets {
    pub upper: Field,
    pub lower: Field,
    pub pseudo_steps: usize,
}

impl Brackets {
    pub fn midpoint(&self) -> Field {
        self.upper
            .iter()
            .zip(self.lower.iter())
            .map(|(u, l)| 0.5 * (u + l))
            .collect::<Vec<_>>()
            .into()
    }

    pub fn gap(&self) -> f64 {
        crate::mesh::max_abs_diff(&self.upper, &self.lower)
    }
}

/// Largest pseudo-time step for which `n - h R(n)` is order preserving on
/// `[0, cap]`: the reciprocal of a bound on the diagonal of the Jacobian.
pub fn order_preserving_pseudo_dt(cap: f64, params: &ImplicitStepParams, law: &PressureLaw, rates: Rates<'_>) -> f64 {
    let (gamma, kappa) = (law.gamma, law.kappa);
    let p_max = law.pressure(cap);
    let dp_max = law.dpressure(cap);
    let flux_bound = kappa * (gamma + 1.0) * cap.powf(gamma) / params.dx;
    let diag = 1.0
        + params.dt * rates.max_abs(p_max)
        + params.dt * rates.lipschitz() * dp_max * cap
        + 2.0 * params.nu * flux_bound;
    1.0 / diag
}

pub fn solve_step_monotone(
    n_curr: &[f64],
    params: &ImplicitStepParams,
    law: &PressureLaw,
    rates: Rates<'_>,
) -> Result<Brackets> {
    solve_step_monotone_observed(n_curr, params, law, rates, |_, _, _| {})
}

/// Pseudo-time iteration `dn/dtau = -R(n)` started from the constant
/// supersolution and from 0, advanced with forward Euler using the same
/// step for both. `observe(k, upper, lower)` sees every pseudo-step,
/// starting with `k = 0` for the initial brackets.
///
/// Stops when the bracket gap and both residuals are below `monotone_tol`.
pub fn solve_step_monotone_observed(
    n_curr: &[f64],
    params: &ImplicitStepParams,
    law: &PressureLaw,
    rates: Rates<'_>,
    mut observe: impl FnMut(usize, &[f64], &[f64]),
) -> Result<Brackets> {
    check_input(n_curr)?;
    let len = n_curr.len();
    let cap = supersolution_bound(n_curr, params, law, rates)?;
    let h = params
        .monotone_pseudo_dt
        .unwrap_or_else(|| order_preserving_pseudo_dt(cap, params, law, rates));
    let mut upper = vec![cap; len];
    let mut lower = vec![0.0; len];
    let mut ws_u = ResidualWorkspace::new(len);
    let mut ws_l = ResidualWorkspace::new(len);
    let tol = params.monotone_tol;
    observe(0, &upper, &lower);
    let mut gap = f64::INFINITY;
    for k in 1..=params.monotone_max_steps {
        ws_u.evaluate(&upper, n_curr, params, law, rates);
        ws_l.evaluate(&lower, n_curr, params, law, rates);
        gap = crate::mesh::max_abs_diff(&upper, &lower);
        if gap <= tol && ws_u.max_norm() <= tol && ws_l.max_norm() <= tol {
            return Ok(Brackets {
                upper: upper.into(),
                lower: lower.into(),
                pseudo_steps: k - 1,
            });
        }
        for i in 0..len {
            upper[i] -= h * ws_u.r[i];
            lower[i] -= h * ws_l.r[i];
        }
        observe(k, &upper, &lower);
    }
    Err(Error::MonotoneBudget {
        steps: params.monotone_max_steps,
        gap,
    })
}
