//! Norms and monitors computed from states and step histories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::{GrowthModel, Rates};
use crate::law::PressureLaw;
use crate::mesh::{Field2D, Grid1D, Grid2D};
use crate::scheme2d::{gradient_lq_norms, pressure2d};
use crate::semidiscrete::ab_min_from_pressure;
use crate::state::SimState;
use crate::stencil::second_difference_at;

/// Absolute slack on every a priori bound.
pub const BOUND_SLACK: f64 = 1e-8;

/// Exponents for which gradient norms are reported; `f64::INFINITY` is the
/// max norm.
pub const GRADIENT_EXPONENTS: [f64; 6] = [2.0, 4.0, 6.0, 8.0, 10.0, f64::INFINITY];

/// One row of diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `dx sum n`.
    pub mass: f64,
    /// `dx sum p`.
    pub l1_pressure: f64,
    pub linf_density: f64,
    pub linf_pressure: f64,
    /// `dx sum |n_{i+1} - n_i|`.
    pub bv: f64,
    /// `dx sum |N^{k+1} - N^k| / dt`, when a previous state is known.
    pub dt_l1: Option<f64>,
    /// `dx sum |q_{i+1/2}|^2`.
    pub grad_l2_sq: f64,
    /// `min_i (delta^2 p_i + G_i)` over interior nodes.
    pub ab_min: f64,
    /// `dx sum |p_i (delta^2 p_i + G_i)|`.
    pub comp_residual: f64,
    /// `(q, ||grad p||_q)` pairs, filled for 2D runs only.
    pub lq_grad_norms: Vec<(f64, f64)>,
}

/// Growth rates seen by `state`: per node from the nutrient field for
/// nutrient-fed laws, the pressure law otherwise.
pub fn state_rates(state: &SimState, growth: &GrowthModel) -> Result<Option<Vec<f64>>> {
    if growth.is_nutrient_fed() {
        Ok(Some(state.nutrient_rates(growth)?))
    } else {
        Ok(None)
    }
}

/// Complementarity residual `dx sum |p_i (delta^2 p_i + G_i)|` over all nodes.
pub fn complementarity_residual(p: &[f64], dx: f64, rates: Rates<'_>) -> f64 {
    (0..p.len())
        .map(|i| (p[i] * (second_difference_at(p, i, dx) + rates.at(i, p[i]))).abs())
        .sum::<f64>()
        * dx
}

pub fn record(
    state: &SimState,
    prev: Option<&SimState>,
    law: &PressureLaw,
    growth: &GrowthModel,
    grid: &Grid1D,
) -> Result<DiagnosticsRecord> {
    grid.check(&state.n)?;
    let dx = grid.dx;
    let n = &state.n;
    let p: Vec<f64> = n.iter().map(|&v| law.pressure(v)).collect();
    let frozen = state_rates(state, growth)?;
    let rates = match &frozen {
        Some(r) => Rates::PerNode(r),
        None => Rates::Pressure(growth),
    };
    let dt_l1 = match prev {
        Some(prev) => {
            grid.check(&prev.n)?;
            let dt = state.t - prev.t;
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "previous state at t = {} is not before t = {}",
                    prev.t, state.t
                )));
            }
            Some(n.iter().zip(prev.n.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx / dt)
        }
        None => None,
    };
    Ok(DiagnosticsRecord {
        t: state.t,
        mass: n.iter().sum::<f64>() * dx,
        l1_pressure: p.iter().sum::<f64>() * dx,
        linf_density: n.iter().map(|v| v.abs()).fold(0.0, f64::max),
        linf_pressure: p.iter().map(|v| v.abs()).fold(0.0, f64::max),
        bv: n.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() * dx,
        dt_l1,
        grad_l2_sq: p.windows(2).map(|w| ((w[1] - w[0]) / dx).powi(2)).sum::<f64>() * dx,
        ab_min: ab_min_from_pressure(&p, dx, rates),
        comp_residual: complementarity_residual(&p, dx, rates),
        lq_grad_norms: Vec::new(),
    })
}

/// 2D counterpart of [`record`]: sums carry `dx^2`, the variation and
/// gradient sums run over x- and y-faces, and the five-point Laplacian uses
/// the zero-flux closure at the boundary. Gradient norms for
/// [`GRADIENT_EXPONENTS`] are filled in.
pub fn record2d(
    n: &Field2D,
    t: f64,
    prev: Option<(&Field2D, f64)>,
    law: &PressureLaw,
    growth: &GrowthModel,
    grid: &Grid2D,
) -> Result<DiagnosticsRecord> {
    let side = grid.side();
    if n.side != side {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            found: n.values.len(),
        });
    }
    if growth.is_nutrient_fed() {
        return Err(Error::InvalidArgument("2D diagnostics support pressure-fed growth only".into()));
    }
    let dx = grid.dx;
    let area = dx * dx;
    let v = &n.values;
    let p = pressure2d(n, law);
    let pv = &p.values;
    let dt_l1 = match prev {
        Some((old, t_old)) => {
            if old.side != side || !(t > t_old) {
                return Err(Error::InvalidArgument("previous 2D state does not precede the current one".into()));
            }
            Some(v.iter().zip(&old.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * area / (t - t_old))
        }
        None => None,
    };
    let mut bv = 0.0;
    let mut ab_min = f64::INFINITY;
    let mut comp = 0.0;
    for j in 0..side {
        for i in 0..side {
            let k = j * side + i;
            let mut lap = 0.0;
            if i + 1 < side {
                bv += (v[k + 1] - v[k]).abs();
                lap += pv[k + 1] - pv[k];
            }
            if i > 0 {
                lap -= pv[k] - pv[k - 1];
            }
            if j + 1 < side {
                bv += (v[k + side] - v[k]).abs();
                lap += pv[k + side] - pv[k];
            }
            if j > 0 {
                lap -= pv[k] - pv[k - side];
            }
            let w = lap / area + growth.eval(pv[k]);
            if i > 0 && j > 0 && i + 1 < side && j + 1 < side {
                ab_min = ab_min.min(w);
            }
            comp += (pv[k] * w).abs();
        }
    }
    let norms = gradient_lq_norms(&p, grid, &GRADIENT_EXPONENTS)?;
    Ok(DiagnosticsRecord {
        t,
        mass: n.sum() * area,
        l1_pressure: pv.iter().sum::<f64>() * area,
        linf_density: n.values.iter().map(|x| x.abs()).fold(0.0, f64::max),
        linf_pressure: pv.iter().map(|x| x.abs()).fold(0.0, f64::max),
        bv: bv * dx,
        dt_l1,
        grad_l2_sq: norms[0] * norms[0],
        ab_min: if ab_min.is_finite() { ab_min } else { 0.0 },
        comp_residual: comp * area,
        lq_grad_norms: GRADIENT_EXPONENTS.iter().copied().zip(norms).collect(),
    })
}

/// Running space-time L1 error `sum_j sum_i |N_i^j - n(x_i, t_j)| dx dt`.
#[derive(Clone, Debug, Default)]
pub struct SpaceTimeL1 {
    pub total: f64,
    pub samples: usize,
}

impl SpaceTimeL1 {
    /// Adds one time level; returns the spatial error `sum_i |N_i - n(x_i, t)| dx`.
    pub fn add(&mut self, n: &[f64], t: f64, exact: impl Fn(f64, f64) -> f64, grid: &Grid1D, dt: f64) -> f64 {
        let spatial = n
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - exact(grid.x(i), t)).abs())
            .sum::<f64>()
            * grid.dx;
        self.total += spatial * dt;
        self.samples += 1;
        spatial
    }
}

/// Space-time L1 error of a history against an exact solution.
pub fn l1_error_spacetime(
    history: &[SimState],
    exact: impl Fn(f64, f64) -> f64,
    grid: &Grid1D,
    dt: f64,
) -> f64 {
    let mut acc = SpaceTimeL1::default();
    for s in history {
        acc.add(&s.n, s.t, &exact, grid, dt);
    }
    acc.total
}

/// Space-time L1 distance between two histories of equal shape.
pub fn l1_distance_spacetime(a: &[SimState], b: &[SimState], grid: &Grid1D, dt: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        if x.n.len() != y.n.len() {
            return Err(Error::GridMismatch {
                expected: x.n.len(),
                found: y.n.len(),
            });
        }
        total += x.n.iter().zip(y.n.iter()).map(|(u, v)| (u - v).abs()).sum::<f64>() * grid.dx * dt;
    }
    Ok(total)
}

/// Time-integrated and sup-in-time complementarity residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Complementarity {
    pub integral: f64,
    pub sup: f64,
}

impl Complementarity {
    pub fn add(&mut self, value: f64, dt: f64) {
        self.integral += value * dt;
        self.sup = self.sup.max(value);
    }
}

pub fn complementarity_sup(
    history: &[SimState],
    law: &PressureLaw,
    growth: &GrowthModel,
    grid: &Grid1D,
    dt: f64,
) -> Result<Complementarity> {
    let mut acc = Complementarity::default();
    for s in history {
        let p: Vec<f64> = s.n.iter().map(|&v| law.pressure(v)).collect();
        let frozen = state_rates(s, growth)?;
        let rates = match &frozen {
            Some(r) => Rates::PerNode(r),
            None => Rates::Pressure(growth),
        };
        acc.add(complementarity_residual(&p, grid.dx, rates), dt);
    }
    Ok(acc)
}

/// Checks the geometric a priori bounds of the implicit scheme along a run:
/// mass, BV and `dx sum |delta_t N|` stay below `(1 - dt G(0))^-k` times
/// their first values, plus [`BOUND_SLACK`].
#[derive(Clone, Debug)]
pub struct GronwallMonitor {
    factor: f64,
    mass0: f64,
    bv0: f64,
    dt_l1_first: Option<f64>,
    /// Accumulated `dt dx sum |q|^2`.
    pub grad_l2_sq_integral: f64,
    pub worst_ratio: f64,
}

impl GronwallMonitor {
    pub fn new(initial: &DiagnosticsRecord, dt: f64, g0: f64) -> Result<Self> {
        let g0 = g0.max(0.0);
        crate::implicit1d::check_time_step(dt, g0)?;
        Ok(Self {
            factor: 1.0 / (1.0 - dt * g0),
            mass0: initial.mass,
            bv0: initial.bv,
            dt_l1_first: None,
            grad_l2_sq_integral: 0.0,
            worst_ratio: 0.0,
        })
    }

    /// Checks the record after step `k`; `dt` is that step's size.
    pub fn check(&mut self, k: usize, rec: &DiagnosticsRecord, dt: f64) -> Result<()> {
        let bound = self.factor.powi(k as i32);
        self.grad_l2_sq_integral += dt * rec.grad_l2_sq;
        let mut verify = |name: &str, value: f64, reference: f64| -> Result<()> {
            let limit = bound * reference + BOUND_SLACK;
            if reference > 0.0 {
                self.worst_ratio = self.worst_ratio.max(value / (bound * reference));
            }
            if value > limit {
                return Err(Error::Assertion(format!(
                    "{name} = {value:e} exceeds {limit:e} at step {k}"
                )));
            }
            Ok(())
        };
        verify("mass", rec.mass, self.mass0)?;
        verify("bv", rec.bv, self.bv0)?;
        if let Some(d) = rec.dt_l1 {
            match self.dt_l1_first {
                None => self.dt_l1_first = Some(d),
                Some(first) => {
                    // the time-derivative bound starts from step 1
                    let bound1 = self.factor.powi(k as i32 - 1);
                    let limit = bound1 * first + BOUND_SLACK;
                    if d > limit {
                        return Err(Error::Assertion(format!(
                            "dt_l1 = {d:e} exceeds {limit:e} at step {k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("slope fit needs at least two pairs".into()));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("slope fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Observed convergence order between two successive refinements with ratio 2.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
