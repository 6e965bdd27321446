//! Growth-rate laws `G(p)` and `G(c)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Piecewise-linear pressure-dependent growth rate.
///
/// Built only from strictly decreasing samples; the construction records the
/// homeostatic pressure (the root) and the smallest decay rate `alpha` so the
/// table carries its own `G' <= -alpha < 0` certificate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthTable {
    pressures: Vec<f64>,
    rates: Vec<f64>,
    p_h: f64,
    alpha: f64,
    max_slope: f64,
}

impl GrowthTable {
    pub fn new(pressures: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if pressures.len() != rates.len() || pressures.len() < 2 {
            return Err(Error::InvalidArgument(
                "growth table needs at least two (p, G) pairs of equal length".into(),
            ));
        }
        if pressures[0] != 0.0 {
            return Err(Error::InvalidArgument("growth table must start at p = 0".into()));
        }
        let mut alpha = f64::INFINITY;
        let mut max_slope: f64 = 0.0;
        for k in 1..pressures.len() {
            let dp = pressures[k] - pressures[k - 1];
            if !(dp > 0.0) {
                return Err(Error::InvalidArgument("growth table pressures must increase".into()));
            }
            let slope = (rates[k] - rates[k - 1]) / dp;
            if !(slope < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "growth table is not strictly decreasing on [{}, {}]",
                    pressures[k - 1],
                    pressures[k]
                )));
            }
            alpha = alpha.min(-slope);
            max_slope = max_slope.max(-slope);
        }
        let mut table = Self {
            pressures,
            rates,
            p_h: f64::NAN,
            alpha,
            max_slope,
        };
        table.p_h = table.root().ok_or_else(|| {
            Error::InvalidArgument("growth table has no homeostatic pressure (no sign change)".into())
        })?;
        Ok(table)
    }

    fn root(&self) -> Option<f64> {
        if self.rates[0] <= 0.0 {
            return None;
        }
        for k in 1..self.pressures.len() {
            if self.rates[k] <= 0.0 {
                let (p0, p1) = (self.pressures[k - 1], self.pressures[k]);
                let (g0, g1) = (self.rates[k - 1], self.rates[k]);
                return Some(p0 + g0 * (p1 - p0) / (g0 - g1));
            }
        }
        // extrapolate along the last segment
        let n = self.pressures.len();
        let slope = self.slope_of(n - 1);
        Some(self.pressures[n - 1] - self.rates[n - 1] / slope)
    }

    fn slope_of(&self, k: usize) -> f64 {
        (self.rates[k] - self.rates[k - 1]) / (self.pressures[k] - self.pressures[k - 1])
    }

    fn segment(&self, p: f64) -> usize {
        let n = self.pressures.len();
        match self.pressures.partition_point(|&q| q <= p) {
            0 | 1 => 1,
            k if k >= n => n - 1,
            k => k,
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        let k = self.segment(p);
        self.rates[k - 1] + self.slope_of(k) * (p - self.pressures[k - 1])
    }

    pub fn derivative(&self, p: f64) -> f64 {
        self.slope_of(self.segment(p))
    }

    pub fn homeostatic_pressure(&self) -> f64 {
        self.p_h
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Growth-rate law.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthModel {
    /// `G(p) = alpha (p_H - p)`.
    LinearPressure { alpha: f64, p_h: f64 },
    /// `G = g0`, independent of pressure and nutrient.
    Constant { g0: f64 },
    /// `G(c) = c`.
    NutrientLinear,
    /// `G(c) = g_low` for `c < c_threshold`, `g_high` otherwise.
    NutrientPiecewise {
        g_low: f64,
        g_high: f64,
        c_threshold: f64,
    },
    /// Tabulated strictly decreasing `G(p)`.
    PressureGeneric(GrowthTable),
}

impl GrowthModel {
    pub fn linear_pressure(alpha: f64, p_h: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(p_h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "linear pressure growth needs alpha > 0 and p_H > 0 (got {alpha}, {p_h})"
            )));
        }
        Ok(GrowthModel::LinearPressure { alpha, p_h })
    }

    pub fn none() -> Self {
        GrowthModel::Constant { g0: 0.0 }
    }

    /// Evaluates `G` at a pressure (pressure-fed laws) or a nutrient
    /// concentration (nutrient-fed laws).
    pub fn eval(&self, arg: f64) -> f64 {
        match self {
            GrowthModel::LinearPressure { alpha, p_h } => alpha * (p_h - arg),
            GrowthModel::Constant { g0 } => *g0,
            GrowthModel::NutrientLinear => arg,
            GrowthModel::NutrientPiecewise {
                g_low,
                g_high,
                c_threshold,
            } => {
                if arg < *c_threshold {
                    *g_low
                } else {
                    *g_high
                }
            }
            GrowthModel::PressureGeneric(t) => t.eval(arg),
        }
    }

    /// `dG/dp` for pressure-fed laws; zero for the rest.
    pub fn dpressure(&self, p: f64) -> f64 {
        match self {
            GrowthModel::LinearPressure { alpha, .. } => -alpha,
            GrowthModel::PressureGeneric(t) => t.derivative(p),
            _ => 0.0,
        }
    }

    pub fn is_nutrient_fed(&self) -> bool {
        matches!(
            self,
            GrowthModel::NutrientLinear | GrowthModel::NutrientPiecewise { .. }
        )
    }

    pub fn homeostatic_pressure(&self) -> Option<f64> {
        match self {
            GrowthModel::LinearPressure { p_h, .. } => Some(*p_h),
            GrowthModel::PressureGeneric(t) => Some(t.homeostatic_pressure()),
            _ => None,
        }
    }

    /// Largest `|dG/dp|`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            GrowthModel::LinearPressure { alpha, .. } => *alpha,
            GrowthModel::PressureGeneric(t) => t.max_slope,
            _ => 0.0,
        }
    }

    /// Supremum of `G` over admissible arguments: `G(0)` for pressure-fed
    /// laws, the largest value reachable for `c` in `[0, c_b]` otherwise.
    pub fn max_rate(&self, c_b: f64) -> f64 {
        match self {
            GrowthModel::NutrientLinear => c_b.max(0.0),
            GrowthModel::NutrientPiecewise {
                g_low,
                g_high,
                c_threshold,
            } => {
                if c_b < *c_threshold {
                    *g_low
                } else {
                    g_low.max(*g_high)
                }
            }
            other => other.eval(0.0),
        }
    }
}

/// Per-step view of the growth rate seen by a scheme: either a pressure law
/// evaluated at the unknown pressure, or rates frozen per node (nutrient-fed
/// runs, where `G(c_i)` is fixed for the duration of a step).
#[derive(Clone, Copy, Debug)]
pub enum Rates<'a> {
    Pressure(&'a GrowthModel),
    PerNode(&'a [f64]),
}

impl<'a> Rates<'a> {
    #[inline]
    pub fn at(&self, i: usize, p: f64) -> f64 {
        match self {
            Rates::Pressure(g) => g.eval(p),
            Rates::PerNode(r) => r[i],
        }
    }

    /// `dG_i/dp`.
    #[inline]
    pub fn dp(&self, p: f64) -> f64 {
        match self {
            Rates::Pressure(g) => g.dpressure(p),
            Rates::PerNode(_) => 0.0,
        }
    }

    /// Largest rate that can occur during the step.
    pub fn max_rate(&self) -> f64 {
        match self {
            Rates::Pressure(g) => g.eval(0.0),
            Rates::PerNode(r) => r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Bound on `|G|` for pressures in `[0, p_max]`.
    pub fn max_abs(&self, p_max: f64) -> f64 {
        match self {
            Rates::Pressure(g) => g.eval(0.0).abs().max(g.eval(p_max).abs()),
            Rates::PerNode(r) => r.iter().map(|v| v.abs()).fold(0.0, f64::max),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Rates::Pressure(g) => g.lipschitz(),
            Rates::PerNode(_) => 0.0,
        }
    }

    pub fn homeostatic_pressure(&self) -> Option<f64> {
        match self {
            Rates::Pressure(g) => g.homeostatic_pressure(),
            Rates::PerNode(_) => None,
        }
    }
}

/// Single-argument evaluation, kept as a free function for symmetry with the
/// other stencil operations.
pub fn growth_eval(model: &GrowthModel, arg: f64) -> f64 {
    model.eval(arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let g = GrowthModel::linear_pressure(1.0, 1.0).unwrap();
        assert_eq!(growth_eval(&g, 1.0), 0.0);
        assert_eq!(growth_eval(&GrowthModel::NutrientLinear, 0.7), 0.7);
        let pw = GrowthModel::NutrientPiecewise {
            g_low: 12.0,
            g_high: -15.0,
            c_threshold: 0.4,
        };
        assert_eq!(growth_eval(&pw, 0.39), 12.0);
        assert_eq!(growth_eval(&pw, 0.4), -15.0);
    }

    #[test]
    fn max_rates() {
        assert_eq!(GrowthModel::NutrientLinear.max_rate(1.0), 1.0);
        assert_eq!(GrowthModel::linear_pressure(2.0, 1.5).unwrap().max_rate(1.0), 3.0);
        assert_eq!(GrowthModel::none().max_rate(1.0), 0.0);
    }

    #[test]
    fn table_certificate() {
        let t = GrowthTable::new(vec![0.0, 0.5, 2.0], vec![1.0, 0.5, -1.0]).unwrap();
        assert!((t.homeostatic_pressure() - 1.0).abs() < 1e-15);
        assert_eq!(t.alpha(), 1.0);
        assert!((t.eval(0.25) - 0.75).abs() < 1e-15);
        assert!((t.eval(3.0) + 2.0).abs() < 1e-15);
        assert!(GrowthTable::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(GrowthTable::new(vec![0.0, 1.0], vec![-1.0, -2.0]).is_err());
    }

    proptest! {
        #[test]
        fn linear_pressure_secant_bound(a in 0.0f64..5.0, b in 0.0f64..5.0, alpha in 0.1f64..4.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let g = GrowthModel::linear_pressure(alpha, 1.0).unwrap();
            let secant = (g.eval(a) - g.eval(b)) / (a - b);
            prop_assert!(secant <= -alpha + 1e-9);
        }
    }
}
