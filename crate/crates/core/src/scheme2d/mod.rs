//! Implicit upwind scheme on a square 2D grid, built dimension by dimension
//! from the same two-point flux `A(U, V)` as the 1D scheme.
//!
//! Node `(i, j)` is stored at `j * side + i` (x fastest). Faces on all four
//! sides of the domain carry no flux.

mod krylov;
mod relax;

pub use krylov::{bicgstab, FivePoint};
pub use relax::relaxation_sweep;

use crate::error::{Error, Result};
use crate::growth::{GrowthModel, Rates};
use crate::implicit1d::{check_time_step, flux_from_pressures, FluxPair, ImplicitStepParams};
use crate::law::PressureLaw;
use crate::linalg::BandMatrix;
use crate::mesh::{Field2D, Grid2D};
use crate::par::{self, Execution};

/// Grids with at most this many nodes per side use Newton with a banded
/// direct solve; larger ones use Newton with an iterative inner solve.
pub const NEWTON_SIDE_LIMIT: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Solver2D {
    /// Banded Newton on small grids, Newton-Krylov otherwise, with
    /// relaxation as a fallback if the iterative solve breaks down.
    Auto,
    Newton,
    NewtonKrylov,
    Relaxation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scheme2DParams {
    pub step: ImplicitStepParams,
    pub solver: Solver2D,
    /// Over-relaxation factor for the red-black sweeps, in `(0, 2)`.
    pub omega: f64,
    pub max_sweeps: usize,
}

impl Scheme2DParams {
    pub fn new(dt: f64, grid: &Grid2D) -> Result<Self> {
        Ok(Self {
            step: ImplicitStepParams::new(dt, grid.dx)?,
            solver: Solver2D::Auto,
            omega: 1.0,
            max_sweeps: 100_000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::InvalidArgument(format!("omega must lie in (0, 2), got {}", self.omega)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

fn pressure_rates(growth: &GrowthModel) -> Result<Rates<'_>> {
    if growth.is_nutrient_fed() {
        return Err(Error::InvalidArgument("the 2D scheme supports pressure-fed growth only".into()));
    }
    Ok(Rates::Pressure(growth))
}

/// Residual buffers for the 2D step: `p`, `dp` per node, flux pairs on
/// x-faces (`fx[j * (side-1) + i]` between `(i, j)` and `(i+1, j)`) and
/// y-faces (`fy[j * side + i]` between `(i, j)` and `(i, j+1)`).
#[derive(Clone, Debug, Default)]
pub struct Workspace2D {
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    pub fx: Vec<FluxPair>,
    pub fy: Vec<FluxPair>,
    pub r: Vec<f64>,
}

impl Workspace2D {
    pub fn new(side: usize) -> Self {
        let n = side * side;
        Self {
            p: vec![0.0; n],
            dp: vec![0.0; n],
            fx: vec![FluxPair::default(); (side - 1) * side],
            fy: vec![FluxPair::default(); side * (side - 1)],
            r: vec![0.0; n],
        }
    }

    pub fn evaluate(
        &mut self,
        side: usize,
        n_next: &[f64],
        n_curr: &[f64],
        params: &ImplicitStepParams,
        law: &PressureLaw,
        rates: Rates<'_>,
        exec: Execution,
    ) {
        let dx = params.dx;
        par::fill_indexed(exec, &mut self.p, |k| law.pressure(n_next[k]));
        let p = &self.p;
        par::fill_indexed(exec, &mut self.dp, |k| law.dpressure_given(n_next[k], p[k]));
        let (p, dp) = (&self.p, &self.dp);
        for j in 0..side {
            for i in 0..side - 1 {
                let (a, b) = (j * side + i, j * side + i + 1);
                self.fx[j * (side - 1) + i] = flux_from_pressures(n_next[a], n_next[b], p[a], p[b], dp[a], dp[b], dx);
            }
        }
        for j in 0..side - 1 {
            for i in 0..side {
                let (a, b) = (j * side + i, (j + 1) * side + i);
                self.fy[j * side + i] = flux_from_pressures(n_next[a], n_next[b], p[a], p[b], dp[a], dp[b], dx);
            }
        }
        let (fx, fy) = (&self.fx, &self.fy);
        let nu = params.nu;
        let dt = params.dt;
        par::for_each_row(exec, &mut self.r, side, |j, row| {
            for (i, r) in row.iter_mut().enumerate() {
                let k = j * side + i;
                let mut div = 0.0;
                if i + 1 < side {
                    div += fx[j * (side - 1) + i].value;
                }
                if i > 0 {
                    div -= fx[j * (side - 1) + i - 1].value;
                }
                if j + 1 < side {
                    div += fy[j * side + i].value;
                }
                if j > 0 {
                    div -= fy[(j - 1) * side + i].value;
                }
                *r = (1.0 - dt * rates.at(k, p[k])) * n_next[k] - nu * div - n_curr[k];
            }
        });
    }

    pub fn max_norm(&self) -> f64 {
        crate::mesh::max_abs(&self.r)
    }
}

/// Residual of the 2D implicit step.
pub fn residual2d(
    n_next: &Field2D,
    n_curr: &Field2D,
    params: &ImplicitStepParams,
    law: &PressureLaw,
    growth: &GrowthModel,
) -> Result<Field2D> {
    if n_next.side != n_curr.side {
        return Err(Error::GridMismatch {
            expected: n_curr.values.len(),
            found: n_next.values.len(),
        });
    }
    let side = n_curr.side;
    let mut ws = Workspace2D::new(side);
    ws.evaluate(side, &n_next.values, &n_curr.values, params, law, pressure_rates(growth)?, params.exec);
    Ok(Field2D { side, values: ws.r })
}

/// Upper bound for the 2D step solution (same constant supersolution as in 1D).
fn cap(n_curr: &[f64], params: &ImplicitStepParams, law: &PressureLaw, rates: Rates<'_>) -> Result<f64> {
    crate::implicit1d::supersolution_bound(n_curr, params, law, rates)
}

/// One implicit 2D step.
pub fn step2d(
    n_curr: &Field2D,
    grid: &Grid2D,
    params: &Scheme2DParams,
    law: &PressureLaw,
    growth: &GrowthModel,
) -> Result<Field2D> {
    params.validate()?;
    if n_curr.side != grid.side() {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            found: n_curr.values.len(),
        });
    }
    let rates = pressure_rates(growth)?;
    check_time_step(params.step.dt, rates.max_rate().max(0.0))?;
    crate::implicit1d::check_input(&n_curr.values)?;
    let (side, n) = (grid.side(), &n_curr.values);
    let values = match params.solver {
        Solver2D::Newton => newton2d(n, side, &params.step, law, rates)?,
        Solver2D::NewtonKrylov => krylov::newton_krylov(n, side, &params.step, law, rates)?,
        Solver2D::Relaxation => relax::relax2d(n, side, params, law, rates)?,
        Solver2D::Auto if side <= NEWTON_SIDE_LIMIT => newton2d(n, side, &params.step, law, rates)?,
        Solver2D::Auto => match krylov::newton_krylov(n, side, &params.step, law, rates) {
            Ok(v) => v,
            Err(_) => relax::relax2d(n, side, params, law, rates)?,
        },
    };
    Ok(Field2D {
        side: grid.side(),
        values,
    })
}

fn newton2d(n_curr: &[f64], side: usize, params: &ImplicitStepParams, law: &PressureLaw, rates: Rates<'_>) -> Result<Vec<f64>> {
    let len = n_curr.len();
    let cap = cap(n_curr, params, law, rates)?;
    let mut x: Vec<f64> = n_curr.iter().map(|&v| v.clamp(0.0, cap)).collect();
    let mut ws = Workspace2D::new(side);
    let mut trial_ws = Workspace2D::new(side);
    ws.evaluate(side, &x, n_curr, params, law, rates, params.exec);
    let mut norm = ws.max_norm();
    let mut jac = BandMatrix::zeros(len, side);
    let mut trial = vec![0.0; len];
    let nu = params.nu;
    for iteration in 0..params.newton_max_iter {
        if norm <= params.newton_tol {
            return Ok(x);
        }
        jac.clear();
        for k in 0..len {
            let g = rates.at(k, ws.p[k]);
            let dg = rates.dp(ws.p[k]);
            jac.add(k, k, 1.0 - params.dt * g - params.dt * dg * ws.dp[k] * x[k]);
        }
        // face between a (left/bottom) and b (right/top): R_a has -nu A, R_b has +nu A
        let mut add_face = |a: usize, b: usize, f: &FluxPair| {
            jac.add(a, a, -nu * f.partial_1);
            jac.add(a, b, -nu * f.partial_2);
            jac.add(b, a, nu * f.partial_1);
            jac.add(b, b, nu * f.partial_2);
        };
        for j in 0..side {
            for i in 0..side - 1 {
                add_face(j * side + i, j * side + i + 1, &ws.fx[j * (side - 1) + i]);
            }
        }
        for j in 0..side - 1 {
            for i in 0..side {
                add_face(j * side + i, (j + 1) * side + i, &ws.fy[j * side + i]);
            }
        }
        let mut delta: Vec<f64> = ws.r.iter().map(|v| -v).collect();
        jac.solve_in_place(&mut delta)?;
        let mut lambda = 1.0;
        loop {
            for k in 0..len {
                trial[k] = (x[k] + lambda * delta[k]).clamp(0.0, cap);
            }
            trial_ws.evaluate(side, &trial, n_curr, params, law, rates, params.exec);
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

/// Discrete `L^q` norm of the pressure gradient,
/// `(sum over x- and y-faces |q_face|^q dx^2)^(1/q)`; `q = inf` gives the
/// largest face gradient.
pub fn gradient_lq_norm(p: &Field2D, grid: &Grid2D, q: f64) -> Result<f64> {
    Ok(gradient_lq_norms(p, grid, &[q])?[0])
}

/// Several gradient norms from one pass over the faces.
pub fn gradient_lq_norms(p: &Field2D, grid: &Grid2D, qs: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = qs.iter().find(|&&q| !(q >= 1.0)) {
        return Err(Error::Domain {
            index: 0,
            value: bad,
            what: "gradient norm exponent must be >= 1",
        });
    }
    let side = p.side;
    if side != grid.side() {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            found: p.values.len(),
        });
    }
    let dx = grid.dx;
    let v = &p.values;
    // per-row partial sums, folded in row order
    let row_ids: Vec<usize> = (0..side).collect();
    let rows: Vec<Vec<f64>> = par::map_collect(Execution::default(), &row_ids, |&j| {
        let mut acc = vec![0.0; qs.len()];
        let mut visit = |g: f64| {
            let g = g.abs();
            for (a, &q) in acc.iter_mut().zip(qs) {
                if q.is_infinite() {
                    *a = f64::max(*a, g);
                } else {
                    *a += if q.fract() == 0.0 { g.powi(q as i32) } else { g.powf(q) };
                }
            }
        };
        for i in 0..side - 1 {
            visit((v[j * side + i + 1] - v[j * side + i]) / dx);
        }
        if j + 1 < side {
            for i in 0..side {
                visit((v[(j + 1) * side + i] - v[j * side + i]) / dx);
            }
        }
        acc
    });
    Ok(qs
        .iter()
        .enumerate()
        .map(|(m, &q)| {
            if q.is_infinite() {
                rows.iter().map(|r| r[m]).fold(0.0, f64::max)
            } else {
                (rows.iter().map(|r| r[m]).sum::<f64>() * dx * dx).powf(1.0 / q)
            }
        })
        .collect())
}

/// Pressure field of a 2D density.
pub fn pressure2d(n: &Field2D, law: &PressureLaw) -> Field2D {
    Field2D {
        side: n.side,
        values: n.values.iter().map(|&v| law.pressure(v)).collect(),
    }
}

/// Minimum of `p` over nodes within `radius` of the origin.
pub fn min_near_origin(p: &Field2D, grid: &Grid2D, radius: f64) -> f64 {
    let side = grid.side();
    let mut m = f64::INFINITY;
    for j in 0..side {
        for i in 0..side {
            let (x, y) = (grid.coord(i), grid.coord(j));
            if x * x + y * y <= radius * radius * (1.0 + 1e-12) {
                m = m.min(p.values[grid.index(i, j)]);
            }
        }
    }
    m
}

/// Hole-closure detector: the minimum pressure over the disc of radius
/// `2 dx` at the origin exceeds `1e-6 p_H`.
pub fn is_focused(p: &Field2D, grid: &Grid2D, p_h: f64) -> bool {
    min_near_origin(p, grid, 2.0 * grid.dx) > 1e-6 * p_h
}

/// Shell initial data: `value` for `r_in < |x| < r_out`, 0 elsewhere.
pub fn shell(grid: &Grid2D, r_in: f64, r_out: f64, value: f64) -> Field2D {
    grid.sample(|x, y| {
        let r = (x * x + y * y).sqrt();
        if r > r_in && r < r_out {
            value
        } else {
            0.0
        }
    })
}
