//! Method-of-lines form of the upwind scheme,
//!
//! ```text
//! dn_i/dt = (n_{i+1/2} q_{i+1/2} - n_{i-1/2} q_{i-1/2}) / dx + n_i G_i,
//! ```
//!
//! with a forward-Euler integrator. This path is not used for production
//! runs; it is the reference the implicit solvers and the Aronson-Benilan
//! monitor are checked against.

use crate::error::{Error, Result};
use crate::growth::{GrowthModel, Rates};
use crate::law::PressureLaw;
use crate::mesh::{Field, Grid1D};
use crate::state::SimState;
use crate::stencil::{second_difference_at, upwind_face_value};

/// Negative values closer to zero than this are treated as rounding noise.
pub const NEGATIVITY_GUARD: f64 = 1e-14;
/// Allowed excess over the density cap before a step is declared unstable.
pub const CAP_GUARD: f64 = 1e-10;
/// Default fraction of the diffusive stability limit used by the integrator.
pub const DEFAULT_CFL: f64 = 0.2;

/// Scratch buffers for one right-hand-side evaluation.
#[derive(Clone, Debug, Default)]
pub struct RhsWorkspace {
    pub p: Vec<f64>,
    /// Face gradients, `len - 1` entries.
    pub q: Vec<f64>,
    /// Donor densities on faces.
    pub n_half: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl RhsWorkspace {
    pub fn new(len: usize) -> Self {
        Self {
            p: vec![0.0; len],
            q: vec![0.0; len.saturating_sub(1)],
            n_half: vec![0.0; len.saturating_sub(1)],
            rhs: vec![0.0; len],
        }
    }

    /// Evaluates the right-hand side into `self.rhs`.
    pub fn evaluate(&mut self, n: &[f64], dx: f64, law: &PressureLaw, rates: Rates<'_>) {
        let len = n.len();
        if self.rhs.len() != len {
            *self = Self::new(len);
        }
        for (p, &v) in self.p.iter_mut().zip(n) {
            *p = law.pressure(v);
        }
        for i in 0..len.saturating_sub(1) {
            let q = (self.p[i + 1] - self.p[i]) / dx;
            self.q[i] = q;
            self.n_half[i] = upwind_face_value(n[i], n[i + 1], q);
        }
        for i in 0..len {
            let right = if i + 1 < len { self.n_half[i] * self.q[i] } else { 0.0 };
            let left = if i > 0 { self.n_half[i - 1] * self.q[i - 1] } else { 0.0 };
            self.rhs[i] = (right - left) / dx + n[i] * rates.at(i, self.p[i]);
        }
    }
}

fn rates_for<'a>(
    state: &SimState,
    growth: &'a GrowthModel,
    buffer: &'a mut Vec<f64>,
) -> Result<Rates<'a>> {
    if growth.is_nutrient_fed() {
        *buffer = state.nutrient_rates(growth)?;
        Ok(Rates::PerNode(buffer))
    } else {
        Ok(Rates::Pressure(growth))
    }
}

/// Full right-hand side, reaction term included.
pub fn rhs(state: &SimState, grid: &Grid1D, law: &PressureLaw, growth: &GrowthModel) -> Result<Field> {
    grid.check(&state.n)?;
    let mut buf = Vec::new();
    let rates = rates_for(state, growth, &mut buf)?;
    let mut ws = RhsWorkspace::new(grid.len());
    ws.evaluate(&state.n, grid.dx, law, rates);
    Ok(Field::from(ws.rhs))
}

/// Largest forward-Euler step allowed by the diffusive limit
/// `dt <= c_cfl dx^2 / (gamma kappa n_max^gamma)` and by the reaction term.
pub fn stable_dt(n_max: f64, dx: f64, law: &PressureLaw, max_abs_rate: f64, c_cfl: f64) -> f64 {
    let diffusivity = law.gamma * law.pressure(n_max.max(0.0));
    let diffusive = if diffusivity > 0.0 {
        c_cfl * dx * dx / diffusivity
    } else {
        f64::INFINITY
    };
    let reactive = if max_abs_rate > 0.0 {
        0.5 / max_abs_rate
    } else {
        f64::INFINITY
    };
    diffusive.min(reactive)
}

/// One forward-Euler step `n <- n + dt * rhs`.
pub fn step_explicit(
    state: &SimState,
    grid: &Grid1D,
    dt: f64,
    law: &PressureLaw,
    growth: &GrowthModel,
) -> Result<SimState> {
    let mut ws = RhsWorkspace::new(grid.len());
    let mut next = state.clone();
    step_explicit_with(&mut ws, &mut next, grid, dt, law, growth)?;
    Ok(next)
}

/// In-place variant of [`step_explicit`] reusing a workspace.
pub fn step_explicit_with(
    ws: &mut RhsWorkspace,
    state: &mut SimState,
    grid: &Grid1D,
    dt: f64,
    law: &PressureLaw,
    growth: &GrowthModel,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    grid.check(&state.n)?;
    let mut buf = Vec::new();
    let rates = rates_for(state, growth, &mut buf)?;
    ws.evaluate(&state.n, grid.dx, law, rates);
    let cap = growth
        .homeostatic_pressure()
        .map(|p_h| law.density_at(p_h))
        .unwrap_or(f64::INFINITY);
    for (index, (v, r)) in state.n.iter_mut().zip(&ws.rhs).enumerate() {
        let mut next = *v + dt * r;
        if next < 0.0 {
            if next < -NEGATIVITY_GUARD {
                return Err(Error::Stability {
                    index,
                    value: next,
                    upper: cap,
                });
            }
            next = 0.0;
        }
        if next > cap + CAP_GUARD {
            return Err(Error::Stability {
                index,
                value: next,
                upper: cap,
            });
        }
        *v = next;
    }
    state.t += dt;
    Ok(())
}

/// Integrates to `t_end` with a fixed step chosen from the stability budget
/// of the initial data (or of the density cap when larger), calling
/// `observe` after every step.
pub fn integrate_explicit(
    state: &SimState,
    grid: &Grid1D,
    law: &PressureLaw,
    growth: &GrowthModel,
    t_end: f64,
    c_cfl: f64,
    mut observe: impl FnMut(&SimState),
) -> Result<SimState> {
    let cap = growth
        .homeostatic_pressure()
        .map(|p_h| law.density_at(p_h))
        .unwrap_or(0.0);
    let n_max = state.n.max().max(cap);
    let rate_bound = if growth.is_nutrient_fed() {
        state
            .nutrient_rates(growth)?
            .iter()
            .map(|g| g.abs())
            .fold(0.0, f64::max)
    } else {
        growth.eval(0.0).abs().max(growth.eval(law.pressure(n_max)).abs())
    };
    let dt_max = stable_dt(n_max, grid.dx, law, rate_bound, c_cfl);
    let steps = ((t_end - state.t) / dt_max).ceil().max(0.0) as usize;
    let mut current = state.clone();
    if steps == 0 {
        return Ok(current);
    }
    let dt = (t_end - state.t) / steps as f64;
    let mut ws = RhsWorkspace::new(grid.len());
    for k in 0..steps {
        let t = current.t;
        step_explicit_with(&mut ws, &mut current, grid, dt, law, growth).map_err(|e| e.at_step(k, t))?;
        observe(&current);
    }
    Ok(current)
}

/// Discrete Aronson-Benilan quantity `min_i (delta^2 p_i + G(p_i))` over
/// interior nodes.
pub fn ab_monitor(n: &[f64], grid: &Grid1D, law: &PressureLaw, rates: Rates<'_>) -> f64 {
    let p: Vec<f64> = n.iter().map(|&v| law.pressure(v)).collect();
    ab_min_from_pressure(&p, grid.dx, rates)
}

pub(crate) fn ab_min_from_pressure(p: &[f64], dx: f64, rates: Rates<'_>) -> f64 {
    let len = p.len();
    if len < 3 {
        return 0.0;
    }
    (1..len - 1)
        .map(|i| second_difference_at(p, i, dx) + rates.at(i, p[i]))
        .fold(f64::INFINITY, f64::min)
}
