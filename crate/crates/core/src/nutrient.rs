//! Quasi-static nutrient fields for the in vitro and in vivo models.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{Field, Grid1D};

pub use crate::linalg::thomas_solve;

/// Relative support threshold: nodes with `n > SUPPORT_TOL * scale` count as
/// tumor.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Consumption law `psi(n) = rate * n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Consumption {
    pub rate: f64,
}

impl Default for Consumption {
    fn default() -> Self {
        Self { rate: 1.0 }
    }
}

impl Consumption {
    pub fn linear(rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "consumption rate must be finite and >= 0, got {rate}"
            )));
        }
        Ok(Self { rate })
    }

    #[inline]
    pub fn eval(&self, n: f64) -> f64 {
        self.rate * n.max(0.0)
    }
}

/// Nutrient supply model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NutrientModel {
    /// Tumor bathed in a liquid at concentration `c_b`.
    InVitro { c_b: f64, psi: Consumption },
    /// Vasculature outside the tumor relaxes the nutrient towards `c_b`.
    InVivo { c_b: f64, psi: Consumption },
}

impl NutrientModel {
    pub fn in_vitro(c_b: f64) -> Result<Self> {
        check_cb(c_b)?;
        Ok(NutrientModel::InVitro {
            c_b,
            psi: Consumption::default(),
        })
    }

    pub fn in_vivo(c_b: f64) -> Result<Self> {
        check_cb(c_b)?;
        Ok(NutrientModel::InVivo {
            c_b,
            psi: Consumption::default(),
        })
    }

    pub fn c_b(&self) -> f64 {
        match self {
            NutrientModel::InVitro { c_b, .. } | NutrientModel::InVivo { c_b, .. } => *c_b,
        }
    }

    pub fn psi(&self) -> Consumption {
        match self {
            NutrientModel::InVitro { psi, .. } | NutrientModel::InVivo { psi, .. } => *psi,
        }
    }

    /// Solves for the nutrient with whichever model this is, using the
    /// default support threshold.
    pub fn solve(&self, n: &[f64], grid: &Grid1D) -> Result<Field> {
        match self {
            NutrientModel::InVitro { .. } => solve_vitro(n, self, grid),
            NutrientModel::InVivo { .. } => solve_vivo(n, self, grid),
        }
    }
}

fn check_cb(c_b: f64) -> Result<()> {
    if !(c_b > 0.0) || !c_b.is_finite() {
        return Err(Error::InvalidArgument(format!("c_B must be > 0, got {c_b}")));
    }
    Ok(())
}

/// Nodes where the density exceeds a threshold, with their connected runs.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMask {
    pub inside: Vec<bool>,
    /// Inclusive index ranges of consecutive `true` nodes, left to right.
    pub components: Vec<(usize, usize)>,
}

impl SupportMask {
    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }
}

pub fn support_mask(n: &[f64], tol_supp: f64) -> SupportMask {
    let inside: Vec<bool> = n.iter().map(|&v| v > tol_supp).collect();
    let mut components = Vec::new();
    let mut start = None;
    for (i, &b) in inside.iter().enumerate() {
        match (b, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                components.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        components.push((s, inside.len() - 1));
    }
    SupportMask { inside, components }
}

/// Default support threshold for a density field: relative to `n_h` when
/// known, otherwise to `max n`.
pub fn default_tolerance(n: &[f64], n_h: Option<f64>) -> f64 {
    let scale = n_h.unwrap_or_else(|| n.iter().copied().fold(0.0, f64::max));
    SUPPORT_TOL * scale
}

/// In vitro nutrient: `-c'' + psi(n) c = 0` on each support component with
/// `c = c_B` at the neighbouring outside nodes, `c = c_B` elsewhere.
pub fn solve_vitro(n: &[f64], model: &NutrientModel, grid: &Grid1D) -> Result<Field> {
    let mask = support_mask(n, default_tolerance(n, None));
    solve_vitro_with_mask(n, model, grid, &mask)
}

pub fn solve_vitro_with_mask(
    n: &[f64],
    model: &NutrientModel,
    grid: &Grid1D,
    mask: &SupportMask,
) -> Result<Field> {
    let NutrientModel::InVitro { c_b, psi } = *model else {
        return Err(Error::InvalidArgument("solve_vitro needs an in vitro model".into()));
    };
    grid.check(n)?;
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    let mut c = Field::constant(n.len(), c_b);
    for &(a, b) in &mask.components {
        let len = b - a + 1;
        let lower = vec![-inv_dx2; len];
        let upper = vec![-inv_dx2; len];
        let diag: Vec<f64> = (a..=b).map(|i| 2.0 * inv_dx2 + psi.eval(n[i])).collect();
        let mut rhs = vec![0.0; len];
        // outside neighbours (or a missing neighbour at the wall) hold c_B
        rhs[0] += inv_dx2 * c_b;
        rhs[len - 1] += inv_dx2 * c_b;
        let sol = thomas_solve(&lower, &diag, &upper, &rhs)?;
        c[a..=b].copy_from_slice(&sol);
    }
    Ok(c)
}

/// In vivo nutrient: `-c'' + psi(n) c = (c_B - c) 1{n = 0}` on the whole grid
/// with `c = c_B` at both endpoints.
///
/// An outside node whose neighbour lies in the support sits on the discrete
/// interface; there the consumption and the relaxation terms each enter with
/// weight 1/2 (consumption taken from the inside neighbour). Without this the
/// kink in `c''` across the front leaves an O(1) truncation error at one node
/// and the solve degrades to first order.
pub fn solve_vivo(n: &[f64], model: &NutrientModel, grid: &Grid1D) -> Result<Field> {
    let mask = support_mask(n, default_tolerance(n, None));
    solve_vivo_with_mask(n, model, grid, &mask, true)
}

/// In vivo solve with an explicit mask; `interface_closure = false` applies
/// the raw indicator at every node.
pub fn solve_vivo_with_mask(
    n: &[f64],
    model: &NutrientModel,
    grid: &Grid1D,
    mask: &SupportMask,
    interface_closure: bool,
) -> Result<Field> {
    let NutrientModel::InVivo { c_b, psi } = *model else {
        return Err(Error::InvalidArgument("solve_vivo needs an in vivo model".into()));
    };
    grid.check(n)?;
    let len = n.len();
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    let mut lower = vec![-inv_dx2; len];
    let mut upper = vec![-inv_dx2; len];
    let mut diag = vec![0.0; len];
    let mut rhs = vec![0.0; len];
    for i in 0..len {
        if i == 0 || i == len - 1 {
            lower[i] = 0.0;
            upper[i] = 0.0;
            diag[i] = 1.0;
            rhs[i] = c_b;
            continue;
        }
        let (absorb, relax) = if mask.inside[i] {
            (psi.eval(n[i]), 0.0)
        } else if interface_closure && (mask.inside[i - 1] || mask.inside[i + 1]) {
            let mut neighbours = 0.0;
            let mut count = 0.0;
            for j in [i - 1, i + 1] {
                if mask.inside[j] {
                    neighbours += psi.eval(n[j]);
                    count += 1.0;
                }
            }
            (0.5 * neighbours / count, 0.5)
        } else {
            (0.0, 1.0)
        };
        diag[i] = 2.0 * inv_dx2 + absorb + relax;
        rhs[i] = relax * c_b;
    }
    // eliminate the Dirichlet rows so the interior system stays symmetric
    if len > 2 {
        rhs[1] += inv_dx2 * c_b;
        lower[1] = 0.0;
        rhs[len - 2] += inv_dx2 * c_b;
        upper[len - 2] = 0.0;
    }
    Ok(thomas_solve(&lower, &diag, &upper, &rhs)?.into())
}
