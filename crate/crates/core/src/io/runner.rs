//! One runner per experiment. Every run writes into its own directory:
//! `diagnostics.csv`, `snapshot_<step>.csv`, `error.csv` where an exact
//! solution exists, and a `manifest` listing every file with its checksum.
//! The manifest is written even when the run fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analytic::{
    barenblatt_delayed, integrate_front_vitro, integrate_front_vivo, vitro_exact, vivo_exact, FrontRadius,
    BARENBLATT_T0,
};
use crate::diagnostics::{self, log_log_slope, record, record2d, Complementarity, GronwallMonitor, SpaceTimeL1};
use crate::error::{Error, Result};
use crate::growth::GrowthModel;
use crate::implicit1d::{advance, step_count, ImplicitStepParams};
use crate::law::PressureLaw;
use crate::mesh::{Field, Field2D, Grid1D, Grid2D};
use crate::par::{self, Execution};
use crate::scheme2d::{is_focused, pressure2d, shell, step2d, Scheme2DParams};
use crate::state::SimState;
use crate::twospecies::{advance_twospecies, TwoSpeciesState};

use super::config::{Experiment, SimConfig};
use super::output::{diagnostics_header, diagnostics_row, CsvTable, Manifest};

/// Density floor checked on every step.
pub const DENSITY_FLOOR: f64 = -1e-14;
/// Slack on the homeostatic density bound.
pub const CEILING_SLACK: f64 = 1e-10;
/// Times at which 1D fronts are sampled.
pub const FRONT_TIMES: [f64; 3] = [0.5, 1.0, 1.5];
/// Pressure threshold locating a front.
pub const FRONT_PRESSURE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Enforce the a priori bounds on every step (assertion failure otherwise).
    pub check_invariants: bool,
    pub exec: Execution,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: BTreeMap<String, f64>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    summary: BTreeMap<String, f64>,
}

impl Outputs {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn set(&mut self, key: impl Into<String>, v: f64) {
        self.summary.insert(key.into(), v);
    }

    fn finish_table(&mut self, table: CsvTable) -> Result<()> {
        let p = table.finish()?;
        self.files.push(p);
        Ok(())
    }
}

/// Runs the configured experiment into `dir`.
pub fn run_experiment(cfg: &SimConfig, dir: &Path, opts: &RunOptions) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut out = Outputs {
        dir: dir.to_path_buf(),
        files: Vec::new(),
        summary: BTreeMap::new(),
    };
    let result = match cfg.experiment {
        Experiment::Barenblatt | Experiment::Vitro | Experiment::Vivo => run_single(cfg, &mut out, opts),
        Experiment::Twospecies => run_twospecies(cfg, &mut out, opts),
        Experiment::Focusing => run_focusing(cfg, &mut out, opts),
        Experiment::ApSweep => run_sweep(cfg, &mut out, opts),
    };
    let mut manifest = Manifest::new(cfg);
    manifest.summary = out.summary.clone();
    manifest.status = match &result {
        Ok(()) => "ok".into(),
        Err(e) => format!("failed: {e}"),
    };
    let manifest_path = manifest.write(dir, &out.files)?;
    result?;
    let mut files = out.files;
    files.push(manifest_path);
    Ok(RunReport {
        dir: dir.to_path_buf(),
        files,
        summary: out.summary,
    })
}

fn step_params(cfg: &SimConfig, dx: f64, exec: Execution) -> Result<ImplicitStepParams> {
    let mut p = ImplicitStepParams::new(cfg.dt, dx)?.with_exec(exec);
    p.newton_tol = cfg.newton_tol;
    p.newton_max_iter = cfg.newton_max_iter;
    p.monotone_tol = cfg.monotone_tol;
    Ok(p)
}

/// Upper density bound implied by the growth law, if any.
fn density_ceiling(growth: &GrowthModel, law: &PressureLaw) -> Option<f64> {
    growth.homeostatic_pressure().map(|p_h| law.density_at(p_h))
}

fn check_bounds(values: &[f64], ceiling: Option<f64>, t: f64) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if v < DENSITY_FLOOR {
            return Err(Error::Assertion(format!("density {v:e} below {DENSITY_FLOOR:e} at node {i}, t = {t}")));
        }
        if let Some(c) = ceiling {
            if v > c + CEILING_SLACK {
                return Err(Error::Assertion(format!("density {v} above n_H = {c} at node {i}, t = {t}")));
            }
        }
    }
    Ok(())
}

fn snapshot_due(cfg: &SimConfig, k: usize, last: usize) -> bool {
    k == 0 || k == last || (cfg.snapshot_every > 0 && k.is_multiple_of(cfg.snapshot_every))
}

fn diagnostics_due(cfg: &SimConfig, k: usize, last: usize) -> bool {
    k.is_multiple_of(cfg.cadence) || k == last
}

/// Writes `snapshot_<k>.csv` with `x,n,p` and the optional columns.
fn snapshot1d(out: &mut Outputs, k: usize, grid: &Grid1D, law: &PressureLaw, n: &[f64], extra: &[(&str, &[f64])]) -> Result<()> {
    let mut header = vec!["x", "n", "p"];
    header.extend(extra.iter().map(|(h, _)| *h));
    let mut table = CsvTable::create(&out.path(&format!("snapshot_{k}.csv")), &header)?;
    let mut row = vec![0.0; header.len()];
    for i in 0..grid.len() {
        row[0] = grid.x(i);
        row[1] = n[i];
        row[2] = law.pressure(n[i]);
        for (c, (_, col)) in extra.iter().enumerate() {
            row[3 + c] = col[i];
        }
        table.values(&row)?;
    }
    out.finish_table(table)
}

fn snapshot2d(out: &mut Outputs, k: usize, grid: &Grid2D, law: &PressureLaw, n: &Field2D) -> Result<()> {
    let mut table = CsvTable::create(&out.path(&format!("snapshot_{k}.csv")), &["x", "y", "n", "p"])?;
    let side = grid.side();
    for j in 0..side {
        for i in 0..side {
            let v = n.values[grid.index(i, j)];
            table.values(&[grid.coord(i), grid.coord(j), v, law.pressure(v)])?;
        }
    }
    out.finish_table(table)
}

/// Largest `|x_i|` with `p_i > FRONT_PRESSURE`, or 0 for an empty support.
pub fn front_position(n: &[f64], grid: &Grid1D, law: &PressureLaw) -> f64 {
    (0..grid.len())
        .filter(|&i| law.pressure(n[i]) > FRONT_PRESSURE)
        .map(|i| grid.x(i).abs())
        .fold(0.0, f64::max)
}

fn initial_single(cfg: &SimConfig, grid: &Grid1D, law: &PressureLaw) -> Field {
    match cfg.experiment {
        Experiment::Barenblatt => {
            grid.sample(|x| barenblatt_delayed(x, 0.0, cfg.gamma, cfg.barenblatt_c, BARENBLATT_T0))
        }
        Experiment::Vivo => grid.sample(|x| law.density_at(vivo_exact(x, cfg.r0, cfg.c_b, cfg.g0).1)),
        _ => grid.sample(|x| law.density_at(vitro_exact(x, cfg.r0, cfg.c_b).1)),
    }
}

fn limit_pressure(cfg: &SimConfig, x: f64, r: f64) -> f64 {
    match cfg.experiment {
        Experiment::Vivo => vivo_exact(x, r, cfg.c_b, cfg.g0).1,
        _ => vitro_exact(x, r, cfg.c_b).1,
    }
}

/// Barenblatt, in vitro and in vivo runs of the single-species scheme.
fn run_single(cfg: &SimConfig, out: &mut Outputs, opts: &RunOptions) -> Result<()> {
    let grid = cfg.grid1d()?;
    let law = cfg.law()?;
    let growth = cfg.growth();
    let nutrient = cfg.nutrient()?;
    let params = step_params(cfg, grid.dx, opts.exec)?;
    let steps = step_count(0.0, cfg.t_end, cfg.dt);
    let ceiling = density_ceiling(&growth, &law);

    let mut state = SimState::new(0.0, initial_single(cfg, &grid, &law));
    if let Some(m) = &nutrient {
        state.c = Some(m.solve(&state.n, &grid)?);
    }
    let front: Option<FrontRadius> = match cfg.experiment {
        Experiment::Vitro => Some(integrate_front_vitro(cfg.r0, cfg.c_b, cfg.t_end)?),
        Experiment::Vivo => Some(integrate_front_vivo(cfg.r0, cfg.c_b, cfg.g0, cfg.t_end)?),
        _ => None,
    };
    let exact = |x: f64, t: f64| -> f64 {
        match &front {
            Some(f) => {
                if x.abs() < f.at(t) {
                    1.0
                } else {
                    0.0
                }
            }
            None => barenblatt_delayed(x, t, cfg.gamma, cfg.barenblatt_c, BARENBLATT_T0),
        }
    };

    let rec0 = record(&state, None, &law, &growth, &grid)?;
    let mut diag = CsvTable::create(&out.path("diagnostics.csv"), &diagnostics_header(false))?;
    diag.row(&diagnostics_row(&rec0, false))?;
    let mut errors = CsvTable::create(&out.path("error.csv"), &["t", "l1_error"])?;
    let mut spacetime = SpaceTimeL1::default();
    errors.values(&[0.0, SpaceTimeL1::default().add(&state.n, 0.0, exact, &grid, 0.0)])?;
    let c0 = state.c.clone();
    match &c0 {
        Some(c) => snapshot1d(out, 0, &grid, &law, &state.n, &[("c", c)])?,
        None => snapshot1d(out, 0, &grid, &law, &state.n, &[])?,
    }
    if opts.check_invariants {
        check_bounds(&state.n, ceiling, 0.0)?;
    }
    let g0 = match &nutrient {
        Some(m) => growth.max_rate(m.c_b()),
        None => growth.max_rate(0.0),
    };
    let mut gronwall = GronwallMonitor::new(&rec0, cfg.dt, g0)?;
    let mut comp = Complementarity::default();
    let (mut n_max, mut n_min) = (state.n.max(), state.n.min());
    let mut fallbacks = 0usize;
    let mut fronts: Vec<(f64, f64, f64)> = Vec::new();
    let mut pressure_error = None;

    let mut hook = |k: usize, prev: &SimState, next: &SimState, fallback: bool| -> Result<()> {
        let dt = next.t - prev.t;
        let rec = record(next, Some(prev), &law, &growth, &grid)?;
        comp.add(rec.comp_residual, dt);
        n_max = n_max.max(next.n.max());
        n_min = n_min.min(next.n.min());
        fallbacks += fallback as usize;
        if opts.check_invariants {
            check_bounds(&next.n, ceiling, next.t)?;
            gronwall.check(k, &rec, dt)?;
        }
        let spatial = spacetime.add(&next.n, next.t, exact, &grid, dt);
        if diagnostics_due(cfg, k, steps) {
            diag.row(&diagnostics_row(&rec, false))?;
            errors.values(&[next.t, spatial])?;
        }
        if let Some(f) = &front {
            for &ts in FRONT_TIMES.iter().filter(|&&ts| ts <= cfg.t_end) {
                if (next.t - ts).abs() <= 0.5 * dt {
                    fronts.push((ts, front_position(&next.n, &grid, &law), f.at(ts)));
                    if ts == 1.0 {
                        let r = f.at(ts);
                        let err = (0..grid.len())
                            .map(|i| (law.pressure(next.n[i]) - limit_pressure(cfg, grid.x(i), r)).abs())
                            .fold(0.0, f64::max);
                        pressure_error = Some(err);
                    }
                }
            }
        }
        if k != steps && snapshot_due(cfg, k, steps) {
            match &next.c {
                Some(c) => snapshot1d(out, k, &grid, &law, &next.n, &[("c", c)])?,
                None => snapshot1d(out, k, &grid, &law, &next.n, &[])?,
            }
        }
        Ok(())
    };
    let result = advance(state, cfg.t_end, &grid, &params, &law, &growth, nutrient.as_ref(), &mut hook);
    out.set("max_density", n_max);
    out.set("min_density", n_min);
    out.set("fallback_steps", fallbacks as f64);
    out.set("comp_residual_integral", comp.integral);
    out.set("comp_residual_sup", comp.sup);
    out.set("grad_l2_sq_integral", gronwall.grad_l2_sq_integral);
    for (ts, num, ode) in &fronts {
        out.set(format!("front_t{ts}"), *num);
        out.set(format!("radius_t{ts}"), *ode);
    }
    if let Some(e) = pressure_error {
        out.set("pressure_error_t1", e);
    }
    let final_state = match result {
        Ok(s) => s,
        Err(e) => {
            out.finish_table(diag)?;
            out.finish_table(errors)?;
            return Err(e);
        }
    };
    errors.labelled("spacetime", &[spacetime.total])?;
    out.set("err1", spacetime.total);
    out.set("final_mass", final_state.n.integral(grid.dx));
    out.set("front_final", front_position(&final_state.n, &grid, &law));
    out.finish_table(diag)?;
    out.finish_table(errors)?;
    match &nutrient {
        Some(m) => {
            let c = m.solve(&final_state.n, &grid)?;
            snapshot1d(out, steps, &grid, &law, &final_state.n, &[("c", &c)])?
        }
        None => snapshot1d(out, steps, &grid, &law, &final_state.n, &[])?,
    }
    Ok(())
}

fn twospecies_view(s: &TwoSpeciesState) -> SimState {
    SimState {
        t: s.t,
        n: s.total(),
        c: Some(s.c.clone()),
        n_d: Some(s.n_d.clone()),
    }
}

fn snapshot_twospecies(out: &mut Outputs, k: usize, grid: &Grid1D, law: &PressureLaw, s: &TwoSpeciesState) -> Result<()> {
    snapshot1d(out, k, grid, law, &s.total(), &[("c", &s.c), ("n_p", &s.n_p), ("n_d", &s.n_d)])
}

fn run_twospecies(cfg: &SimConfig, out: &mut Outputs, opts: &RunOptions) -> Result<()> {
    let grid = cfg.grid1d()?;
    let law = cfg.law()?;
    let growth = cfg.growth();
    let model = cfg.nutrient()?.expect("two-species runs carry a nutrient model");
    let params = step_params(cfg, grid.dx, opts.exec)?;
    let steps = step_count(0.0, cfg.t_end, cfg.dt);
    let n_p = grid.sample(|x| if x.abs() <= cfg.r0 { 1.0 } else { 0.0 });
    let state = TwoSpeciesState::new(0.0, n_p, Field::zeros(grid.len()), &model, &grid)?;
    let mass0 = state.total().integral(grid.dx);
    let mut diag = CsvTable::create(&out.path("diagnostics.csv"), &diagnostics_header(false))?;
    diag.row(&diagnostics_row(&record(&twospecies_view(&state), None, &law, &growth, &grid)?, false))?;
    snapshot_twospecies(out, 0, &grid, &law, &state)?;
    let (mut n_max, mut n_min) = (state.total().max(), state.total().min());
    let mut prev = twospecies_view(&state);
    let result = advance_twospecies(state, cfg.t_end, &grid, &params, &law, &model, &growth, |k, s| {
        let view = twospecies_view(s);
        n_max = n_max.max(view.n.max());
        n_min = n_min.min(s.n_p.min().min(s.n_d.min()));
        if opts.check_invariants {
            check_bounds(&s.n_p, None, s.t)?;
            check_bounds(&s.n_d, None, s.t)?;
        }
        if diagnostics_due(cfg, k, steps) {
            diag.row(&diagnostics_row(&record(&view, Some(&prev), &law, &growth, &grid)?, false))?;
        }
        if snapshot_due(cfg, k, steps) {
            snapshot_twospecies(out, k, &grid, &law, s)?;
        }
        prev = view;
        Ok(())
    });
    out.finish_table(diag)?;
    out.set("max_density", n_max);
    out.set("min_density", n_min);
    out.set("initial_mass", mass0);
    let s = result?;
    let total = s.total();
    let centre = grid.len() / 2;
    let front = (0..grid.len())
        .filter(|&i| law.pressure(total[i]) > FRONT_PRESSURE)
        .max()
        .unwrap_or(centre);
    let near_front = (front.saturating_sub(5)..=front).map(|i| s.n_p[i]).fold(0.0, f64::max);
    out.set("final_mass", total.integral(grid.dx));
    out.set("front_final", grid.x(front));
    out.set("n_d_centre", s.n_d[centre]);
    out.set("n_p_centre", s.n_p[centre]);
    out.set("n_p_near_front", near_front);
    Ok(())
}

/// Peak-to-baseline ratio of a gradient-norm series: the largest value
/// within `window` of `t_focus` over the median of the values before `t_base`.
pub fn peak_ratio(times: &[f64], values: &[f64], t_focus: f64, window: f64, t_base: f64) -> Option<f64> {
    let peak = times
        .iter()
        .zip(values)
        .filter(|(t, _)| (*t - t_focus).abs() <= window)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut base: Vec<f64> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t > 0.0 && **t < t_base)
        .map(|(_, v)| *v)
        .collect();
    if base.is_empty() || !peak.is_finite() {
        return None;
    }
    base.sort_by(f64::total_cmp);
    let mid = base.len() / 2;
    let median = if base.len() % 2 == 1 { base[mid] } else { 0.5 * (base[mid - 1] + base[mid]) };
    (median > 0.0).then(|| peak / median)
}

/// Half-width of the window around the focusing time in which the
/// gradient peak is sought.
pub const PEAK_WINDOW: f64 = 0.05;
/// Baseline samples are taken before this time.
pub const BASELINE_END: f64 = 0.3;

fn run_focusing(cfg: &SimConfig, out: &mut Outputs, opts: &RunOptions) -> Result<()> {
    let grid = cfg.grid2d()?;
    let law = cfg.law()?;
    let growth = cfg.growth();
    let mut params = Scheme2DParams::new(cfg.dt, &grid)?;
    params.step = step_params(cfg, grid.dx, opts.exec)?;
    params.solver = cfg.solver_2d.into();
    params.omega = cfg.omega;
    let ceiling = density_ceiling(&growth, &law);
    let p_h = growth.homeostatic_pressure().unwrap_or(1.0);
    let steps = step_count(0.0, cfg.t_end, cfg.dt);
    let mut n = shell(&grid, cfg.r_in, cfg.r_out, cfg.value);
    let mut t = 0.0;
    let mut diag = CsvTable::create(&out.path("diagnostics.csv"), &diagnostics_header(true))?;
    let rec0 = record2d(&n, t, None, &law, &growth, &grid)?;
    diag.row(&diagnostics_row(&rec0, true))?;
    snapshot2d(out, 0, &grid, &law, &n)?;
    let mut gronwall = GronwallMonitor::new(&rec0, cfg.dt, growth.max_rate(0.0))?;
    let mut times = vec![0.0];
    let mut series: Vec<Vec<f64>> = rec0.lq_grad_norms.iter().map(|&(_, v)| vec![v]).collect();
    let (mut n_max, mut n_min) = (n.max(), n.min());
    let mut focus_time = None;
    let mut comp = Complementarity::default();
    let mut run = || -> Result<()> {
        for k in 1..=steps {
            let t_next = if k == steps { cfg.t_end } else { k as f64 * cfg.dt };
            let mut p = params;
            p.step = p.step.with_dt(t_next - t);
            let next = step2d(&n, &grid, &p, &law, &growth).map_err(|e| e.at_step(k, t))?;
            let rec = record2d(&next, t_next, Some((&n, t)), &law, &growth, &grid)?;
            comp.add(rec.comp_residual, t_next - t);
            n_max = n_max.max(next.max());
            n_min = n_min.min(next.min());
            if opts.check_invariants {
                check_bounds(&next.values, ceiling, t_next).map_err(|e| e.at_step(k, t_next))?;
                gronwall.check(k, &rec, t_next - t).map_err(|e| e.at_step(k, t_next))?;
            }
            times.push(t_next);
            for (s, &(_, v)) in series.iter_mut().zip(&rec.lq_grad_norms) {
                s.push(v);
            }
            if focus_time.is_none() && is_focused(&pressure2d(&next, &law), &grid, p_h) {
                focus_time = Some(t_next);
            }
            if diagnostics_due(cfg, k, steps) {
                diag.row(&diagnostics_row(&rec, true))?;
            }
            n = next;
            t = t_next;
            if snapshot_due(cfg, k, steps) {
                snapshot2d(out, k, &grid, &law, &n)?;
            }
        }
        Ok(())
    };
    let result = run();
    out.finish_table(diag)?;
    out.set("max_density", n_max);
    out.set("min_density", n_min);
    out.set("comp_residual_integral", comp.integral);
    out.set("comp_residual_sup", comp.sup);
    if let Some(tf) = focus_time {
        out.set("focus_time", tf);
        for (q, s) in diagnostics::GRADIENT_EXPONENTS.iter().zip(&series) {
            if let Some(r) = peak_ratio(&times, s, tf, PEAK_WINDOW, BASELINE_END) {
                let name = if q.is_infinite() { "inf".to_string() } else { format!("{q}") };
                out.set(format!("peak_ratio_q{name}"), r);
            }
        }
    }
    result
}

fn run_sweep(cfg: &SimConfig, out: &mut Outputs, opts: &RunOptions) -> Result<()> {
    let members: Vec<(f64, SimConfig)> = cfg
        .gammas
        .iter()
        .map(|&g| cfg.sweep_member(g).map(|c| (g, c)))
        .collect::<Result<_>>()?;
    let dir = out.dir.clone();
    let inner = RunOptions {
        exec: Execution::Sequential,
        ..*opts
    };
    let reports = par::map_collect(opts.exec, &members, |(g, member)| {
        run_experiment(member, &dir.join(format!("gamma_{g}")), &inner)
    });
    let mut table = CsvTable::create(&out.path("ap_sweep.csv"), &["gamma", "comp_residual_integral", "comp_residual_sup"])?;
    let mut rows = Vec::new();
    let mut first_err = None;
    for ((g, _), rep) in members.iter().zip(reports) {
        match rep {
            Ok(rep) => {
                out.files.extend(rep.files.iter().cloned());
                let integral = rep.summary["comp_residual_integral"];
                let sup = rep.summary["comp_residual_sup"];
                table.values(&[*g, integral, sup])?;
                rows.push((*g, integral));
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    out.finish_table(table)?;
    if let Some(e) = first_err {
        return Err(e);
    }
    let (gs, ints): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
    if let Ok(slope) = log_log_slope(&gs, &ints) {
        out.set("slope", slope);
    }
    for w in rows.windows(2) {
        let ((g1, i1), (g2, i2)) = (w[0], w[1]);
        if g2 > g1 && !(i2 < i1) {
            return Err(Error::Assertion(format!(
                "complementarity integral does not decrease: gamma {g1} -> {i1:e}, gamma {g2} -> {i2:e}"
            )));
        }
    }
    Ok(())
}
