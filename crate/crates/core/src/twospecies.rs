//! Proliferating and necrotic cells sharing one pressure,
//!
//! ```text
//! d_t n_P - d_x(n_P d_x p) = n_P G(c)
//! d_t n_D - d_x(n_D d_x p) = n_P |G(c)|_-      p = kappa (n_P + n_D)^gamma
//! ```
//!
//! Each species is discretized with the implicit upwind scheme, with the
//! donor value of that species and the face gradient of the shared pressure.
//! The two are solved together by Newton on the interleaved unknowns, which
//! gives a 2x2 block-tridiagonal Jacobian.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::GrowthModel;
use crate::implicit1d::{check_time_step, ImplicitStepParams};
use crate::law::PressureLaw;
use crate::linalg::{block_thomas_solve, Block};
use crate::mesh::{Field, Grid1D};
use crate::nutrient::NutrientModel;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoSpeciesState {
    pub t: f64,
    pub n_p: Field,
    pub n_d: Field,
    /// Nutrient used by the most recent step (or solved from the initial
    /// density before the first one).
    pub c: Field,
}

impl TwoSpeciesState {
    pub fn new(t: f64, n_p: Field, n_d: Field, model: &NutrientModel, grid: &Grid1D) -> Result<Self> {
        grid.check(&n_p)?;
        grid.check(&n_d)?;
        let total = total_density(&n_p, &n_d);
        let c = model.solve(&total, grid)?;
        Ok(Self { t, n_p, n_d, c })
    }

    pub fn total(&self) -> Field {
        total_density(&self.n_p, &self.n_d)
    }
}

fn total_density(a: &[f64], b: &[f64]) -> Field {
    a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>().into()
}

#[inline]
fn negative_part(g: f64) -> f64 {
    (-g).max(0.0)
}

/// Upwind flux of one species on a face and its derivatives with respect to
/// the four unknowns `(P_i, D_i, P_{i+1}, D_{i+1})`.
#[derive(Clone, Copy, Debug, Default)]
struct SpeciesFlux {
    value: f64,
    /// `d/dX_i` for X in (P, D).
    left: [f64; 2],
    /// `d/dX_{i+1}`.
    right: [f64; 2],
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn species_flux(s: usize, x_l: [f64; 2], x_r: [f64; 2], p_l: f64, p_r: f64, dp_l: f64, dp_r: f64, dx: f64) -> SpeciesFlux {
    let q = (p_r - p_l) / dx;
    if q == 0.0 {
        // differentiable here when the totals agree; mean donor as in 1D
        let w = 0.5 * (x_l[s] + x_r[s]);
        return SpeciesFlux {
            value: 0.0,
            left: [-w * dp_l / dx; 2],
            right: [w * dp_r / dx; 2],
        };
    }
    let upwind_right = q > 0.0;
    let donor = if upwind_right { x_r[s] } else { x_l[s] };
    let mut f = SpeciesFlux {
        value: donor * q,
        left: [-donor * dp_l / dx; 2],
        right: [donor * dp_r / dx; 2],
    };
    if upwind_right {
        f.right[s] += q;
    } else {
        f.left[s] += q;
    }
    f
}

struct Workspace {
    p: Vec<f64>,
    dp: Vec<f64>,
    /// Per face, per species.
    faces: Vec<[SpeciesFlux; 2]>,
    r: Vec<[f64; 2]>,
}

impl Workspace {
    fn new(len: usize) -> Self {
        Self {
            p: vec![0.0; len],
            dp: vec![0.0; len],
            faces: vec![[SpeciesFlux::default(); 2]; len.saturating_sub(1)],
            r: vec![[0.0; 2]; len],
        }
    }

    fn evaluate(&mut self, x: &[[f64; 2]], prev: &[[f64; 2]], rates: &[f64], params: &ImplicitStepParams, law: &PressureLaw) {
        let len = x.len();
        for i in 0..len {
            let n = x[i][0] + x[i][1];
            self.p[i] = law.pressure(n);
            self.dp[i] = law.dpressure(n);
        }
        for i in 0..len.saturating_sub(1) {
            for s in 0..2 {
                self.faces[i][s] = species_flux(s, x[i], x[i + 1], self.p[i], self.p[i + 1], self.dp[i], self.dp[i + 1], params.dx);
            }
        }
        for i in 0..len {
            let g = rates[i];
            let sources = [g * x[i][0], negative_part(g) * x[i][0]];
            for s in 0..2 {
                let right = if i + 1 < len { self.faces[i][s].value } else { 0.0 };
                let left = if i > 0 { self.faces[i - 1][s].value } else { 0.0 };
                self.r[i][s] = x[i][s] - prev[i][s] - params.nu * (right - left) - params.dt * sources[s];
            }
        }
    }

    fn max_norm(&self) -> f64 {
        self.r.iter().flat_map(|r| r.iter()).map(|v| v.abs()).fold(0.0, f64::max)
    }
}

const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// Solves one coupled implicit step with frozen per-node rates.
pub fn solve_coupled_step(
    n_p: &[f64],
    n_d: &[f64],
    rates: &[f64],
    params: &ImplicitStepParams,
    law: &PressureLaw,
) -> Result<(Field, Field)> {
    let len = n_p.len();
    if n_d.len() != len || rates.len() != len {
        return Err(Error::GridMismatch {
            expected: len,
            found: n_d.len().min(rates.len()),
        });
    }
    for (index, &value) in n_p.iter().chain(n_d).enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::Domain {
                index: index % len,
                value,
                what: "species densities must be finite and nonnegative",
            });
        }
    }
    let g_plus = rates.iter().copied().fold(0.0, f64::max);
    check_time_step(params.dt, g_plus)?;
    let n_max = n_p.iter().zip(n_d).map(|(a, b)| a + b).fold(0.0, f64::max);
    let cap = n_max / (1.0 - params.dt * g_plus);

    let prev: Vec<[f64; 2]> = n_p.iter().zip(n_d).map(|(&a, &b)| [a, b]).collect();
    let mut x = prev.clone();
    let mut trial = prev.clone();
    let mut ws = Workspace::new(len);
    let mut trial_ws = Workspace::new(len);
    ws.evaluate(&x, &prev, rates, params, law);
    let mut norm = ws.max_norm();
    let mut lower = vec![[0.0; 4]; len];
    let mut diag = vec![[0.0; 4]; len];
    let mut upper = vec![[0.0; 4]; len];
    let mut rhs = vec![[0.0; 2]; len];

    for iteration in 0..params.newton_max_iter {
        if norm <= params.newton_tol {
            break;
        }
        for i in 0..len {
            let g = rates[i];
            let mut d: Block = [1.0, 0.0, 0.0, 1.0];
            // source derivatives: row P gets -dt G dP, row D gets -dt |G|_- dP
            d[0] -= params.dt * g;
            d[2] -= params.dt * negative_part(g);
            let mut lo: Block = [0.0; 4];
            let mut up: Block = [0.0; 4];
            for s in 0..2 {
                for c in 0..2 {
                    if i + 1 < len {
                        let f = ws.faces[i][s];
                        d[2 * s + c] -= params.nu * f.left[c];
                        up[2 * s + c] = -params.nu * f.right[c];
                    }
                    if i > 0 {
                        let f = ws.faces[i - 1][s];
                        d[2 * s + c] += params.nu * f.right[c];
                        lo[2 * s + c] = params.nu * f.left[c];
                    }
                }
            }
            diag[i] = d;
            lower[i] = lo;
            upper[i] = up;
            rhs[i] = [-ws.r[i][0], -ws.r[i][1]];
        }
        let delta = block_thomas_solve(&lower, &diag, &upper, &rhs)?;
        let mut lambda = 1.0;
        loop {
            for i in 0..len {
                for s in 0..2 {
                    trial[i][s] = (x[i][s] + lambda * delta[i][s]).clamp(0.0, cap);
                }
            }
            trial_ws.evaluate(&trial, &prev, rates, params, law);
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
                    iterate: x.iter().flat_map(|v| v.iter().copied()).collect(),
                });
            }
        }
    }
    if norm > params.newton_tol {
        return Err(Error::NewtonDiverged {
            iterations: params.newton_max_iter,
            residual: norm,
            iterate: x.iter().flat_map(|v| v.iter().copied()).collect(),
        });
    }
    let p: Vec<f64> = x.iter().map(|v| v[0]).collect();
    let d: Vec<f64> = x.iter().map(|v| v[1]).collect();
    Ok((p.into(), d.into()))
}

/// Maximum number of step halvings tried after a Newton failure.
pub const MAX_SUBSTEP_LEVELS: u32 = 4;

/// One step of size `params.dt`: the nutrient is solved from the
/// start-of-step total density, then both species are advanced together.
/// If Newton fails the step is retried as 2, 4, ... substeps with the same
/// frozen nutrient.
pub fn step_twospecies(
    state: &TwoSpeciesState,
    grid: &Grid1D,
    params: &ImplicitStepParams,
    law: &PressureLaw,
    model: &NutrientModel,
    growth: &GrowthModel,
) -> Result<TwoSpeciesState> {
    if !growth.is_nutrient_fed() {
        return Err(Error::InvalidArgument("the two-species model needs a nutrient-fed growth law".into()));
    }
    let c = model.solve(&state.total(), grid)?;
    let rates: Vec<f64> = c.iter().map(|&v| growth.eval(v)).collect();
    let mut last_err = None;
    for level in 0..=MAX_SUBSTEP_LEVELS {
        let parts = 1usize << level;
        let sub = params.with_dt(params.dt / parts as f64);
        let mut p = state.n_p.clone();
        let mut d = state.n_d.clone();
        let mut ok = true;
        for _ in 0..parts {
            match solve_coupled_step(&p, &d, &rates, &sub, law) {
                Ok((np, nd)) => {
                    p = np;
                    d = nd;
                }
                Err(e @ Error::NewtonDiverged { .. }) | Err(e @ Error::Singular { .. }) => {
                    last_err = Some(e);
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if ok {
            return Ok(TwoSpeciesState {
                t: state.t + params.dt,
                n_p: p,
                n_d: d,
                c,
            });
        }
    }
    Err(last_err.expect("at least one attempt failed"))
}

/// Advances to `t_end` with steps of `params.dt` (the last one shortened),
/// calling `observe` after every step.
#[allow(clippy::too_many_arguments)]
pub fn advance_twospecies(
    state: TwoSpeciesState,
    t_end: f64,
    grid: &Grid1D,
    params: &ImplicitStepParams,
    law: &PressureLaw,
    model: &NutrientModel,
    growth: &GrowthModel,
    mut observe: impl FnMut(usize, &TwoSpeciesState) -> Result<()>,
) -> Result<TwoSpeciesState> {
    params.validate()?;
    check_time_step(params.dt, growth.max_rate(model.c_b()))?;
    let t0 = state.t;
    let steps = crate::implicit1d::step_count(t0, t_end, params.dt);
    let mut state = state;
    for k in 1..=steps {
        let t_next = if k == steps { t_end } else { t0 + k as f64 * params.dt };
        let step_params = params.with_dt(t_next - state.t);
        let mut next = step_twospecies(&state, grid, &step_params, law, model, growth)
            .map_err(|e| e.at_step(k, state.t))?;
        next.t = t_next;
        observe(k, &next).map_err(|e| e.at_step(k, t_next))?;
        state = next;
    }
    Ok(state)
}

/// Semi-discrete right-hand side of the two-species system with frozen
/// rates, used as an explicit reference.
pub fn rhs_twospecies(n_p: &[f64], n_d: &[f64], rates: &[f64], dx: f64, law: &PressureLaw) -> (Vec<f64>, Vec<f64>) {
    let len = n_p.len();
    let p: Vec<f64> = n_p.iter().zip(n_d).map(|(a, b)| law.pressure(a + b)).collect();
    let mut fp = vec![0.0; len.saturating_sub(1)];
    let mut fd = vec![0.0; len.saturating_sub(1)];
    for i in 0..len.saturating_sub(1) {
        let q = (p[i + 1] - p[i]) / dx;
        fp[i] = crate::stencil::upwind_face_value(n_p[i], n_p[i + 1], q) * q;
        fd[i] = crate::stencil::upwind_face_value(n_d[i], n_d[i + 1], q) * q;
    }
    let div_p = crate::stencil::face_divergence(&fp, dx);
    let div_d = crate::stencil::face_divergence(&fd, dx);
    let rp = (0..len).map(|i| div_p[i] + rates[i] * n_p[i]).collect();
    let rd = (0..len).map(|i| div_d[i] + negative_part(rates[i]) * n_p[i]).collect();
    (rp, rd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::Rates;
    use crate::implicit1d::solve_step_newton;

    fn setup() -> (Grid1D, PressureLaw, ImplicitStepParams) {
        let grid = Grid1D::symmetric(2.0, 0.05).unwrap();
        let law = PressureLaw::power(5.0).unwrap();
        let params = ImplicitStepParams::for_grid(1e-3, &grid).unwrap();
        (grid, law, params)
    }

    #[test]
    fn empty_state_is_fixed() {
        let (grid, law, params) = setup();
        let z = vec![0.0; grid.len()];
        let (p, d) = solve_coupled_step(&z, &z, &vec![3.0; grid.len()], &params, &law).unwrap();
        assert!(p.iter().chain(d.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn without_proliferating_cells_dead_cells_only_move() {
        let (grid, law, params) = setup();
        let z = vec![0.0; grid.len()];
        let nd = grid.sample(|x| 0.9 * (1.0 - x * x).max(0.0));
        let (p, d) = solve_coupled_step(&z, &nd, &vec![-4.0; grid.len()], &params, &law).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
        assert!((d.integral(grid.dx) - nd.integral(grid.dx)).abs() < 1e-12);
    }

    #[test]
    fn reduces_to_single_species_without_dead_cells() {
        let (grid, law, params) = setup();
        let np = grid.sample(|x| 0.9 * (1.0 - x * x).max(0.0));
        let rates = grid.sample(|x| 1.0 + 0.5 * x).into_vec();
        let z = vec![0.0; grid.len()];
        let (p, d) = solve_coupled_step(&np, &z, &rates, &params, &law).unwrap();
        let single = solve_step_newton(&np, &params, &law, Rates::PerNode(&rates)).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        assert!(crate::mesh::max_abs_diff(&p, &single.n) < 1e-11);
    }

    #[test]
    fn dying_cells_conserve_total_mass() {
        let (grid, law, params) = setup();
        let mut np = grid.sample(|x| if x.abs() < 1.0 { 1.0 } else { 0.0 }).into_vec();
        let mut nd = vec![0.0; grid.len()];
        let rates = vec![-15.0; grid.len()];
        let m0: f64 = np.iter().chain(&nd).sum::<f64>() * grid.dx;
        for _ in 0..10 {
            let (p, d) = solve_coupled_step(&np, &nd, &rates, &params, &law).unwrap();
            for i in 0..grid.len() {
                assert!(d[i] >= nd[i] - 1e-10 || np[i] == 0.0);
            }
            np = p.into_vec();
            nd = d.into_vec();
        }
        let m1: f64 = np.iter().chain(&nd).sum::<f64>() * grid.dx;
        assert!((m1 - m0).abs() < 1e-10, "{m0} {m1}");
        assert!(np.iter().chain(&nd).all(|&v| v >= 0.0));
    }

    #[test]
    fn implicit_step_approaches_explicit_reference() {
        let (grid, law, _) = setup();
        let np0 = grid.sample(|x| 0.8 * (1.0 - x * x).max(0.0)).into_vec();
        let nd0 = grid.sample(|x| 0.1 * (1.0 - x * x).max(0.0)).into_vec();
        let rates = grid.sample(|x| if x.abs() < 0.5 { -3.0 } else { 2.0 }).into_vec();
        let t_end = 0.01;
        // explicit reference with a tiny step
        let (mut p, mut d) = (np0.clone(), nd0.clone());
        let fine = 20_000;
        let h = t_end / fine as f64;
        for _ in 0..fine {
            let (rp, rd) = rhs_twospecies(&p, &d, &rates, grid.dx, &law);
            for i in 0..p.len() {
                p[i] += h * rp[i];
                d[i] += h * rd[i];
            }
        }
        let err = |steps: usize| {
            let params = ImplicitStepParams::for_grid(t_end / steps as f64, &grid).unwrap();
            let (mut a, mut b) = (Field::from(np0.clone()), Field::from(nd0.clone()));
            for _ in 0..steps {
                let (x, y) = solve_coupled_step(&a, &b, &rates, &params, &law).unwrap();
                a = x;
                b = y;
            }
            crate::mesh::max_abs_diff(&a, &p).max(crate::mesh::max_abs_diff(&b, &d))
        };
        let (e1, e2) = (err(10), err(20));
        assert!(e2 < e1 && e1 / e2 > 1.6, "{e1} {e2}");
    }
}
