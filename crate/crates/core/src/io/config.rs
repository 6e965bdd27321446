//! Run configuration in TOML. Unknown keys and sections are rejected, and
//! parse errors carry the line number.
//!
//! ```toml
//! experiment = "barenblatt"
//!
//! [model]
//! gamma = 3
//!
//! [grid]
//! dx = 0.015625
//!
//! [time]
//! dt = 1.5625e-4
//! t_end = 0.1
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::GrowthModel;
use crate::law::PressureLaw;
use crate::mesh::{Grid1D, Grid2D};
use crate::nutrient::NutrientModel;
use crate::scheme2d::Solver2D;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Barenblatt,
    Vitro,
    Vivo,
    Twospecies,
    Focusing,
    ApSweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Barenblatt => "barenblatt",
            Experiment::Vitro => "vitro",
            Experiment::Vivo => "vivo",
            Experiment::Twospecies => "twospecies",
            Experiment::Focusing => "focusing",
            Experiment::ApSweep => "ap_sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    Vitro,
    Vivo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Auto,
    Newton,
    NewtonKrylov,
    Relaxation,
}

impl From<SolverChoice> for Solver2D {
    fn from(s: SolverChoice) -> Self {
        match s {
            SolverChoice::Auto => Solver2D::Auto,
            SolverChoice::Newton => Solver2D::Newton,
            SolverChoice::NewtonKrylov => Solver2D::NewtonKrylov,
            SolverChoice::Relaxation => Solver2D::Relaxation,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Experiment>,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    growth: RawGrowth,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    sweep: RawSweep,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    gamma: Option<f64>,
    kappa: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dx: Option<f64>,
    x_min: Option<f64>,
    x_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: Option<f64>,
    t_end: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrowth {
    alpha: Option<f64>,
    p_h: Option<f64>,
    c_b: Option<f64>,
    g0: Option<f64>,
    g_low: Option<f64>,
    g_high: Option<f64>,
    c_threshold: Option<f64>,
    environment: Option<Environment>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    barenblatt_c: Option<f64>,
    r0: Option<f64>,
    r_in: Option<f64>,
    r_out: Option<f64>,
    value: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    newton_tol: Option<f64>,
    newton_max_iter: Option<usize>,
    monotone_tol: Option<f64>,
    solver_2d: Option<SolverChoice>,
    omega: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    cadence: Option<usize>,
    snapshot_every: Option<usize>,
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    base: Option<Experiment>,
    gammas: Option<Vec<f64>>,
}

/// Fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub experiment: Experiment,
    pub gamma: f64,
    pub kappa: f64,
    /// `kappa` was not given and follows `gamma` (Barenblatt runs).
    pub kappa_auto: bool,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub alpha: f64,
    pub p_h: f64,
    pub c_b: f64,
    pub g0: f64,
    pub g_low: f64,
    pub g_high: f64,
    pub c_threshold: f64,
    pub environment: Environment,
    /// Constant `C` of the Barenblatt profile.
    pub barenblatt_c: f64,
    /// Initial tumor radius (vitro, vivo, twospecies).
    pub r0: f64,
    /// Shell radii and density for the focusing data.
    pub r_in: f64,
    pub r_out: f64,
    pub value: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub monotone_tol: f64,
    pub solver_2d: SolverChoice,
    pub omega: f64,
    /// Diagnostics every `cadence` steps.
    pub cadence: usize,
    /// Snapshots every `snapshot_every` steps; 0 keeps only the first and last.
    pub snapshot_every: usize,
    pub dir: PathBuf,
    /// Experiment each sweep member runs.
    pub sweep_base: Experiment,
    pub gammas: Vec<f64>,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{field}`: {msg}"))
}

fn require(value: Option<f64>, field: &str) -> Result<f64> {
    value.ok_or_else(|| invalid(field, "missing required value"))
}

fn positive(value: f64, field: &str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(field, format!("must be a positive number, got {value}")))
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    resolve(raw)
}

pub fn load_config(path: &std::path::Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn resolve(raw: RawConfig) -> Result<SimConfig> {
    let experiment = raw.experiment.ok_or_else(|| invalid("experiment", "missing required value"))?;
    let sweep_base = match experiment {
        Experiment::ApSweep => raw.sweep.base.unwrap_or(Experiment::Vitro),
        other => other,
    };
    if matches!(sweep_base, Experiment::ApSweep) {
        return Err(invalid("sweep.base", "a sweep cannot run another sweep"));
    }
    let gammas = raw.sweep.gammas.unwrap_or_default();
    let gamma = match (raw.model.gamma, experiment) {
        (Some(g), _) => g,
        (None, Experiment::ApSweep) if !gammas.is_empty() => gammas[0],
        (None, _) => return Err(invalid("gamma", "missing required value")),
    };
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(invalid("gamma", format!("must be >= 1, got {gamma}")));
    }
    let kappa = match raw.model.kappa {
        Some(k) => positive(k, "kappa")?,
        None if sweep_base == Experiment::Barenblatt => (gamma + 1.0) / gamma,
        None => 1.0,
    };
    let dx = positive(require(raw.grid.dx, "dx")?, "dx")?;
    let dt = positive(require(raw.time.dt, "dt")?, "dt")?;
    let t_end = positive(require(raw.time.t_end, "t_end")?, "t_end")?;
    let half = match sweep_base {
        Experiment::Twospecies => 6.0,
        Experiment::Focusing => 8.0,
        _ => 5.0,
    };
    let x_min = raw.grid.x_min.unwrap_or(-half);
    let x_max = raw.grid.x_max.unwrap_or(half);
    let g = &raw.growth;
    let ini = &raw.initial;
    let cfg = SimConfig {
        experiment,
        gamma,
        kappa,
        kappa_auto: raw.model.kappa.is_none() && sweep_base == Experiment::Barenblatt,
        dx,
        dt,
        t_end,
        x_min,
        x_max,
        alpha: positive(g.alpha.unwrap_or(1.0), "alpha")?,
        p_h: positive(g.p_h.unwrap_or(1.0), "p_h")?,
        c_b: positive(g.c_b.unwrap_or(1.0), "c_b")?,
        g0: positive(g.g0.unwrap_or(1.0), "g0")?,
        g_low: g.g_low.unwrap_or(12.0),
        g_high: g.g_high.unwrap_or(-15.0),
        c_threshold: positive(g.c_threshold.unwrap_or(0.4), "c_threshold")?,
        environment: g.environment.unwrap_or(match sweep_base {
            Experiment::Vivo => Environment::Vivo,
            _ => Environment::Vitro,
        }),
        barenblatt_c: positive(ini.barenblatt_c.unwrap_or(1.0), "barenblatt_c")?,
        r0: positive(ini.r0.unwrap_or(1.0), "r0")?,
        r_in: ini.r_in.unwrap_or(0.6),
        r_out: positive(ini.r_out.unwrap_or(6.0), "r_out")?,
        value: positive(ini.value.unwrap_or(0.8), "value")?,
        newton_tol: positive(
            raw.solver.newton_tol.unwrap_or(if sweep_base == Experiment::Focusing { 1e-10 } else { 1e-12 }),
            "newton_tol",
        )?,
        newton_max_iter: raw.solver.newton_max_iter.unwrap_or(50),
        monotone_tol: positive(raw.solver.monotone_tol.unwrap_or(1e-12), "monotone_tol")?,
        solver_2d: raw.solver.solver_2d.unwrap_or(SolverChoice::Auto),
        omega: raw.solver.omega.unwrap_or(1.0),
        cadence: raw.output.cadence.unwrap_or(1),
        snapshot_every: raw.output.snapshot_every.unwrap_or(0),
        dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
        sweep_base,
        gammas,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl SimConfig {
    /// Checks every cross-field constraint.
    pub fn validate(&self) -> Result<()> {
        if self.cadence == 0 {
            return Err(invalid("cadence", "must be >= 1"));
        }
        if self.newton_max_iter == 0 {
            return Err(invalid("newton_max_iter", "must be >= 1"));
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(invalid("omega", format!("must lie in (0, 2), got {}", self.omega)));
        }
        if !(self.r_in >= 0.0 && self.r_in < self.r_out) {
            return Err(invalid("r_in", format!("must satisfy 0 <= r_in < r_out, got {}", self.r_in)));
        }
        if self.sweep_base == Experiment::Focusing {
            if (self.x_min + self.x_max).abs() > 1e-12 * self.x_max.abs() {
                return Err(invalid("x_min", "the 2D domain must be symmetric about the origin"));
            }
            Grid2D::with_spacing(self.x_max, self.dx).map_err(|e| invalid("dx", e))?;
        } else {
            Grid1D::with_spacing(self.x_min, self.x_max, self.dx).map_err(|e| invalid("dx", e))?;
        }
        if self.experiment == Experiment::ApSweep {
            if self.gammas.len() < 2 {
                return Err(invalid("gammas", "a sweep needs at least two values"));
            }
            if let Some(&g) = self.gammas.iter().find(|&&g| !(g >= 1.0) || !g.is_finite()) {
                return Err(invalid("gammas", format!("every value must be >= 1, got {g}")));
            }
        }
        let g0 = self.growth().max_rate(self.c_b);
        if g0 > 0.0 && self.dt * g0 >= 1.0 {
            return Err(invalid(
                "dt",
                format!("violates dt < 1/G(0): dt = {} but 1/G(0) = {}", self.dt, 1.0 / g0),
            ));
        }
        Ok(())
    }

    /// Copy of a sweep configuration resolved to one member run.
    pub fn sweep_member(&self, gamma: f64) -> Result<SimConfig> {
        let mut cfg = self.clone();
        cfg.experiment = self.sweep_base;
        cfg.gamma = gamma;
        if cfg.kappa_auto {
            cfg.kappa = (gamma + 1.0) / gamma;
        }
        cfg.gammas = Vec::new();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn law(&self) -> Result<PressureLaw> {
        if self.gamma == 1.0 {
            PressureLaw::linear(self.kappa)
        } else {
            PressureLaw::new(self.gamma, self.kappa)
        }
    }

    pub fn growth(&self) -> GrowthModel {
        match self.sweep_base {
            Experiment::Barenblatt => GrowthModel::none(),
            Experiment::Vitro | Experiment::Vivo => GrowthModel::NutrientLinear,
            Experiment::Twospecies => GrowthModel::NutrientPiecewise {
                g_low: self.g_low,
                g_high: self.g_high,
                c_threshold: self.c_threshold,
            },
            Experiment::Focusing | Experiment::ApSweep => GrowthModel::LinearPressure {
                alpha: self.alpha,
                p_h: self.p_h,
            },
        }
    }

    pub fn nutrient(&self) -> Result<Option<NutrientModel>> {
        let model = match self.sweep_base {
            Experiment::Vitro => NutrientModel::in_vitro(self.c_b)?,
            Experiment::Vivo => NutrientModel::in_vivo(self.c_b)?,
            Experiment::Twospecies => match self.environment {
                Environment::Vitro => NutrientModel::in_vitro(self.c_b)?,
                Environment::Vivo => NutrientModel::in_vivo(self.c_b)?,
            },
            _ => return Ok(None),
        };
        Ok(Some(model))
    }

    pub fn grid1d(&self) -> Result<Grid1D> {
        Grid1D::with_spacing(self.x_min, self.x_max, self.dx)
    }

    pub fn grid2d(&self) -> Result<Grid2D> {
        Grid2D::with_spacing(self.x_max, self.dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BARENBLATT: &str = "experiment = \"barenblatt\"\n[model]\ngamma = 3\n[grid]\ndx = 0.015625\n[time]\ndt = 1.5625e-4\nt_end = 0.1\n";

    #[test]
    fn minimal_barenblatt() {
        let cfg = parse_config(BARENBLATT).unwrap();
        assert_eq!(cfg.gamma, 3.0);
        assert_eq!(cfg.dt, 1.5625e-4);
        assert!((cfg.kappa - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!((cfg.x_min, cfg.x_max), (-5.0, 5.0));
        assert_eq!(cfg.cadence, 1);
    }

    #[test]
    fn missing_gamma_is_named() {
        let text = BARENBLATT.replace("gamma = 3\n", "");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("gamma"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = BARENBLATT.replace("t_end = 0.1", "t_end = 0.1\ntend = 0.2");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("tend") && err.contains("line 9"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = BARENBLATT.replace("dx = 0.015625", "dx = = 0.015625");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn time_step_guard() {
        let text = "experiment = \"vitro\"\n[model]\ngamma = 80\n[grid]\ndx = 0.025\n[time]\ndt = 1.0\nt_end = 1\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("dt < 1/G(0)"), "{err}");
        assert!(parse_config(&text.replace("dt = 1.0", "dt = 1e-6")).is_ok());
    }

    #[test]
    fn cadence_and_extent_checks() {
        let zero = BARENBLATT.replace("[time]", "[output]\ncadence = 0\n[time]");
        assert!(parse_config(&zero).unwrap_err().to_string().contains("cadence"));
        let odd = BARENBLATT.replace("dx = 0.015625", "dx = 0.3");
        assert!(parse_config(&odd).unwrap_err().to_string().contains("dx"));
    }

    #[test]
    fn sweep_needs_two_gammas() {
        let text = "experiment = \"ap_sweep\"\n[grid]\ndx = 0.05\n[time]\ndt = 1e-4\nt_end = 0.01\n[sweep]\ngammas = [10]\n";
        assert!(parse_config(text).unwrap_err().to_string().contains("gammas"));
        let ok = parse_config(&text.replace("[10]", "[10, 80]")).unwrap();
        assert_eq!(ok.sweep_base, Experiment::Vitro);
        assert_eq!(ok.sweep_member(80.0).unwrap().experiment, Experiment::Vitro);
    }
}
