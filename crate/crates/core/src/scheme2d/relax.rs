//! Red-black nonlinear relaxation for large 2D grids.
//!
//! Each node update solves its own scalar equation exactly (safeguarded
//! Newton with a bisection bracket on `[0, cap]`) with the neighbours
//! frozen, then over-relaxes by `omega`. Nodes of one colour only read the
//! other colour, so a half-sweep gives the same result in any order.

use super::Scheme2DParams;
use crate::error::{Error, Result};
use crate::growth::Rates;
use crate::implicit1d::{flux_from_pressures, ImplicitStepParams};
use crate::law::PressureLaw;
use crate::par;

/// Residual norm from cached pressures (no `powf`).
fn residual_norm(side: usize, x: &[f64], p: &[f64], n_curr: &[f64], params: &ImplicitStepParams, rates: Rates<'_>) -> f64 {
    let dx = params.dx;
    let flux = |a: usize, b: usize| flux_from_pressures(x[a], x[b], p[a], p[b], 0.0, 0.0, dx).value;
    par::row_max(params.exec, side, |j| {
        let mut worst: f64 = 0.0;
        for i in 0..side {
            let k = j * side + i;
            let mut div = 0.0;
            if i + 1 < side {
                div += flux(k, k + 1);
            }
            if i > 0 {
                div -= flux(k - 1, k);
            }
            if j + 1 < side {
                div += flux(k, k + side);
            }
            if j > 0 {
                div -= flux(k - side, k);
            }
            let r = (1.0 - params.dt * rates.at(k, p[k])) * x[k] - params.nu * div - n_curr[k];
            worst = worst.max(r.abs());
        }
        worst
    })
}

/// Solves the scalar equation of node `k` for its own density.
#[allow(clippy::too_many_arguments)]
fn solve_node(
    k: usize,
    i: usize,
    j: usize,
    side: usize,
    x: &[f64],
    p: &[f64],
    n_curr: &[f64],
    cap: f64,
    params: &ImplicitStepParams,
    law: &PressureLaw,
    rates: Rates<'_>,
) -> f64 {
    let dx = params.dx;
    // (index, neighbour is on the high side)
    let mut nb = [(0usize, false); 4];
    let mut count = 0;
    if i + 1 < side {
        nb[count] = (k + 1, true);
        count += 1;
    }
    if i > 0 {
        nb[count] = (k - 1, false);
        count += 1;
    }
    if j + 1 < side {
        nb[count] = (k + side, true);
        count += 1;
    }
    if j > 0 {
        nb[count] = (k - side, false);
        count += 1;
    }
    let nb = &nb[..count];
    if x[k] == 0.0 && n_curr[k] == 0.0 && nb.iter().all(|&(m, _)| x[m] == 0.0) {
        return 0.0;
    }
    let eval = |u: f64| {
        let pu = law.pressure(u);
        let dpu = law.dpressure(u);
        let g = rates.at(k, pu);
        let mut phi = (1.0 - params.dt * g) * u - n_curr[k];
        let mut dphi = 1.0 - params.dt * g - params.dt * rates.dp(pu) * dpu * u;
        for &(m, high) in nb {
            if high {
                let f = flux_from_pressures(u, x[m], pu, p[m], dpu, 0.0, dx);
                phi -= params.nu * f.value;
                dphi -= params.nu * f.partial_1;
            } else {
                let f = flux_from_pressures(x[m], u, p[m], pu, 0.0, dpu, dx);
                phi += params.nu * f.value;
                dphi += params.nu * f.partial_2;
            }
        }
        (phi, dphi)
    };
    let tol = 0.25 * params.newton_tol;
    let (mut lo, mut hi) = (0.0, cap);
    let mut u = x[k].clamp(0.0, cap);
    for _ in 0..100 {
        let (phi, dphi) = eval(u);
        if phi.abs() <= tol {
            break;
        }
        if phi > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        if hi - lo <= f64::EPSILON * cap {
            break;
        }
        let newton = u - phi / dphi;
        u = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    u
}

/// One half-sweep over nodes with `(i + j) % 2 == color`, writing the
/// relaxed values into `out` (other entries are copied from `x`).
#[allow(clippy::too_many_arguments)]
pub fn relaxation_sweep(
    color: usize,
    side: usize,
    x: &[f64],
    p: &[f64],
    n_curr: &[f64],
    cap: f64,
    omega: f64,
    params: &ImplicitStepParams,
    law: &PressureLaw,
    rates: Rates<'_>,
    out: &mut [f64],
) {
    par::for_each_row(params.exec, out, side, |j, row| {
        for (i, v) in row.iter_mut().enumerate() {
            let k = j * side + i;
            if (i + j) % 2 != color {
                *v = x[k];
                continue;
            }
            let u = solve_node(k, i, j, side, x, p, n_curr, cap, params, law, rates);
            *v = (x[k] + omega * (u - x[k])).clamp(0.0, cap);
        }
    });
}

pub(super) fn relax2d(
    n_curr: &[f64],
    side: usize,
    params: &Scheme2DParams,
    law: &PressureLaw,
    rates: Rates<'_>,
) -> Result<Vec<f64>> {
    let step = &params.step;
    let cap = crate::implicit1d::supersolution_bound(n_curr, step, law, rates)?;
    let mut x: Vec<f64> = n_curr.iter().map(|&v| v.clamp(0.0, cap)).collect();
    let mut p: Vec<f64> = x.iter().map(|&v| law.pressure(v)).collect();
    let mut out = vec![0.0; x.len()];
    let mut norm = residual_norm(side, &x, &p, n_curr, step, rates);
    for _ in 0..params.max_sweeps {
        if norm <= step.newton_tol {
            return Ok(x);
        }
        for color in 0..2 {
            relaxation_sweep(color, side, &x, &p, n_curr, cap, params.omega, step, law, rates, &mut out);
            for (k, (&new, old)) in out.iter().zip(x.iter_mut()).enumerate() {
                if new != *old {
                    *old = new;
                    p[k] = law.pressure(new);
                }
            }
        }
        norm = residual_norm(side, &x, &p, n_curr, step, rates);
    }
    if norm <= step.newton_tol {
        return Ok(x);
    }
    Err(Error::NewtonDiverged {
        iterations: params.max_sweeps,
        residual: norm,
        iterate: x,
    })
}
