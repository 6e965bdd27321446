//! Fully implicit upwind scheme in one dimension.
//!
//! Each step solves
//! `(1 - dt G_i) N_i - nu (A_{i+1/2} - A_{i-1/2}) - N_i^k = 0`, `nu = dt/dx`,
//! with zero flux through the two boundary faces. Newton's method is the
//! workhorse; the monotone bracket iteration is a slower solver that cannot
//! fail to converge and doubles as an oracle.

mod flux;
mod monotone;
mod newton;

pub use flux::{flux_a, flux_from_pressures, FluxPair};
pub use monotone::{solve_step_monotone, solve_step_monotone_observed, Brackets};
pub use newton::{solve_step_newton, NewtonReport};

use crate::error::{Error, Result};
use crate::growth::{GrowthModel, Rates};
use crate::law::PressureLaw;
use crate::mesh::{Field, Grid1D};
use crate::nutrient::NutrientModel;
use crate::par::{self, Execution};
use crate::state::SimState;

/// Step size and solver controls for the implicit scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImplicitStepParams {
    pub dt: f64,
    pub dx: f64,
    /// `dt / dx`.
    pub nu: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Fixed pseudo-time step for the monotone iteration; `None` picks the
    /// largest step that keeps the iteration order preserving.
    pub monotone_pseudo_dt: Option<f64>,
    pub monotone_tol: f64,
    pub monotone_max_steps: usize,
    pub exec: Execution,
}

impl ImplicitStepParams {
    pub fn new(dt: f64, dx: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dt and dx must be positive (got {dt}, {dx})"
            )));
        }
        Ok(Self {
            dt,
            dx,
            nu: dt / dx,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            monotone_pseudo_dt: None,
            monotone_tol: 1e-12,
            monotone_max_steps: 5_000_000,
            exec: Execution::default(),
        })
    }

    pub fn for_grid(dt: f64, grid: &Grid1D) -> Result<Self> {
        Self::new(dt, grid.dx)
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Same controls with a different step size.
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self.nu = dt / self.dx;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("newton_tol", self.newton_tol), ("monotone_tol", self.monotone_tol)] {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(h) = self.monotone_pseudo_dt {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "monotone_pseudo_dt must be > 0, got {h}"
                )));
            }
        }
        if self.newton_max_iter == 0 || self.monotone_max_steps == 0 {
            return Err(Error::InvalidArgument("iteration budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Rejects `dt >= 1 / g0` when the largest growth rate `g0` is positive.
pub fn check_time_step(dt: f64, g0: f64) -> Result<()> {
    if g0 > 0.0 && dt * g0 >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} violates dt < 1/G(0) = {}",
            1.0 / g0
        )));
    }
    Ok(())
}

/// Residual evaluation with reusable buffers. After [`Self::evaluate`],
/// `p`, `dp` hold pressure and `dp/dn` per node and `faces` the flux pairs
/// on interior faces (face `i` between nodes `i` and `i + 1`).
#[derive(Clone, Debug, Default)]
pub struct ResidualWorkspace {
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    pub faces: Vec<FluxPair>,
    pub r: Vec<f64>,
}

impl ResidualWorkspace {
    pub fn new(len: usize) -> Self {
        Self {
            p: vec![0.0; len],
            dp: vec![0.0; len],
            faces: vec![FluxPair::default(); len.saturating_sub(1)],
            r: vec![0.0; len],
        }
    }

    pub fn evaluate(
        &mut self,
        n_next: &[f64],
        n_curr: &[f64],
        params: &ImplicitStepParams,
        law: &PressureLaw,
        rates: Rates<'_>,
    ) {
        let len = n_next.len();
        if self.p.len() != len {
            *self = Self::new(len);
        }
        par::fill_indexed(params.exec, &mut self.p, |i| law.pressure(n_next[i]));
        let p = &self.p;
        par::fill_indexed(params.exec, &mut self.dp, |i| law.dpressure_given(n_next[i], p[i]));
        let dx = params.dx;
        for i in 0..len.saturating_sub(1) {
            self.faces[i] = flux_from_pressures(
                n_next[i],
                n_next[i + 1],
                self.p[i],
                self.p[i + 1],
                self.dp[i],
                self.dp[i + 1],
                dx,
            );
        }
        for i in 0..len {
            let right = if i + 1 < len { self.faces[i].value } else { 0.0 };
            let left = if i > 0 { self.faces[i - 1].value } else { 0.0 };
            let g = rates.at(i, self.p[i]);
            self.r[i] = (1.0 - params.dt * g) * n_next[i] - params.nu * (right - left) - n_curr[i];
        }
    }

    pub fn max_norm(&self) -> f64 {
        crate::mesh::max_abs(&self.r)
    }
}

/// Residual of the implicit step at a candidate `n_next`.
pub fn residual(
    n_next: &[f64],
    n_curr: &[f64],
    params: &ImplicitStepParams,
    law: &PressureLaw,
    rates: Rates<'_>,
) -> Result<Field> {
    if n_next.len() != n_curr.len() {
        return Err(Error::GridMismatch {
            expected: n_curr.len(),
            found: n_next.len(),
        });
    }
    let mut ws = ResidualWorkspace::new(n_next.len());
    ws.evaluate(n_next, n_curr, params, law, rates);
    Ok(ws.r.into())
}

/// Upper bound for the step solution: the constant `n_H` when the growth law
/// has a homeostatic pressure, otherwise `max N^k / (1 - dt max G+)`. Either
/// constant is a supersolution of the step.
pub fn supersolution_bound(
    n_curr: &[f64],
    params: &ImplicitStepParams,
    law: &PressureLaw,
    rates: Rates<'_>,
) -> Result<f64> {
    let n_max = n_curr.iter().copied().fold(0.0, f64::max);
    if let Some(p_h) = rates.homeostatic_pressure() {
        return Ok(law.density_at(p_h).max(n_max));
    }
    let g_max = rates.max_rate().max(0.0);
    check_time_step(params.dt, g_max)?;
    Ok(n_max / (1.0 - params.dt * g_max))
}

pub(crate) fn check_input(n_curr: &[f64]) -> Result<()> {
    for (index, &value) in n_curr.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::Domain {
                index,
                value,
                what: "density must be finite and nonnegative",
            });
        }
    }
    Ok(())
}

/// One implicit step: Newton first, the monotone iteration if Newton fails.
/// The second element reports whether the fallback ran.
pub fn solve_step(
    n_curr: &[f64],
    params: &ImplicitStepParams,
    law: &PressureLaw,
    rates: Rates<'_>,
) -> Result<(Field, bool)> {
    match solve_step_newton(n_curr, params, law, rates) {
        Ok(report) => Ok((report.n, false)),
        Err(Error::NewtonDiverged { .. }) | Err(Error::Singular { .. }) => {
            let b = solve_step_monotone(n_curr, params, law, rates)?;
            Ok((b.midpoint(), true))
        }
        Err(e) => Err(e),
    }
}

/// Growth rates used for a step from `state`: the pressure law itself, or
/// per-node values `G(c_i)` from the attached nutrient field.
fn frozen_rates(state: &SimState, growth: &GrowthModel) -> Result<Option<Vec<f64>>> {
    if growth.is_nutrient_fed() {
        Ok(Some(state.nutrient_rates(growth)?))
    } else {
        Ok(None)
    }
}

/// Per-step observer for [`advance`]: receives the step index (from 1), the
/// state before and after the step, and whether the fallback solver ran.
pub trait StepHook {
    fn on_step(&mut self, step: usize, prev: &SimState, next: &SimState, fallback: bool) -> Result<()>;
}

impl<F> StepHook for F
where
    F: FnMut(usize, &SimState, &SimState, bool) -> Result<()>,
{
    fn on_step(&mut self, step: usize, prev: &SimState, next: &SimState, fallback: bool) -> Result<()> {
        self(step, prev, next, fallback)
    }
}

/// No-op hook.
pub struct NoHook;

impl StepHook for NoHook {
    fn on_step(&mut self, _: usize, _: &SimState, _: &SimState, _: bool) -> Result<()> {
        Ok(())
    }
}

/// Number of steps of size at most `dt` that reach `t_end` from `t0`.
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> usize {
    let span = t_end - t0;
    if span <= 0.0 {
        return 0;
    }
    ((span / dt) * (1.0 - 1e-12)).ceil() as usize
}

/// Advances the implicit scheme from `state.t` to `t_end`.
///
/// The steps have size `params.dt` except possibly the last, which is
/// shortened to land on `t_end`. Times are computed as `t0 + k dt` rather
/// than accumulated. With a nutrient model the nutrient is solved from the
/// current density before every step and stored on the state.
#[allow(clippy::too_many_arguments)]
pub fn advance(
    state: SimState,
    t_end: f64,
    grid: &Grid1D,
    params: &ImplicitStepParams,
    law: &PressureLaw,
    growth: &GrowthModel,
    nutrient: Option<&NutrientModel>,
    hook: &mut dyn StepHook,
) -> Result<SimState> {
    params.validate()?;
    grid.check(&state.n)?;
    if t_end < state.t {
        return Err(Error::InvalidArgument(format!(
            "t_end = {t_end} is before the current time {}",
            state.t
        )));
    }
    let g0 = match nutrient {
        Some(m) if growth.is_nutrient_fed() => growth.max_rate(m.c_b()),
        _ => growth.max_rate(0.0),
    };
    check_time_step(params.dt, g0)?;
    let t0 = state.t;
    let steps = step_count(t0, t_end, params.dt);
    let mut state = state;
    for k in 1..=steps {
        let t_next = if k == steps { t_end } else { t0 + k as f64 * params.dt };
        let step_params = params.with_dt(t_next - state.t);
        let mut prev = state;
        if let Some(model) = nutrient {
            prev.c = Some(model.solve(&prev.n, grid).map_err(|e| e.at_step(k, prev.t))?);
        }
        let frozen = frozen_rates(&prev, growth).map_err(|e| e.at_step(k, prev.t))?;
        let rates = match &frozen {
            Some(r) => Rates::PerNode(r),
            None => Rates::Pressure(growth),
        };
        let (n_next, fallback) =
            solve_step(&prev.n, &step_params, law, rates).map_err(|e| e.at_step(k, prev.t))?;
        let next = SimState {
            t: t_next,
            n: n_next,
            c: prev.c.clone(),
            n_d: prev.n_d.clone(),
        };
        hook.on_step(k, &prev, &next, fallback)
            .map_err(|e| e.at_step(k, prev.t))?;
        state = next;
    }
    Ok(state)
}
