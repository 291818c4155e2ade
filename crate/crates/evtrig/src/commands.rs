use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use evtrig_core::augment::{closed_loop_m, closed_loop_mhat, Kind};
use evtrig_core::hinf::{hinf_norm, DEFAULT_NORM_REL_TOL};
use evtrig_core::linalg::{Mat, Vector};
use evtrig_core::pipeline::{self, reference, CheckRow, DesignConfig, DesignReport};
use evtrig_core::sim::{decay_metrics, l2_budget_report, simulate, ClosedLoopSetup, Simulation, Uncertainty, ZenoVerdict};
use evtrig_core::statespace::{is_hurwitz, StateSpace};
use evtrig_core::trigger::{gamma_static_additive, gamma_static_multiplicative, verify_iqc_condition, IqcGrid, TriggerSpec, IQC_MARGIN};
use serde::Serialize;

use crate::config::{vector, FileConfig, Overrides, Realization};
use crate::output::{self, design_summary, event_summary, rows_table};
use crate::{ExitStatus, RunError};

#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    pub overrides: Overrides,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Serialize)]
struct ControllerFile {
    controller: Realization,
}

pub fn write_controller(path: &Path, k: &StateSpace) -> Result<(), RunError> {
    let text = toml::to_string(&ControllerFile { controller: Realization::from_state_space(k) })
        .map_err(|e| RunError::Config(e.to_string()))?;
    output::write_text(path, &text)
}

fn row(name: &str, computed: f64, reference: f64, tolerance: f64, pass: bool) -> CheckRow {
    CheckRow { name: name.into(), computed, reference, tolerance, pass }
}

fn simulation_rows(sim: &Simulation, trigger: &TriggerSpec, localization_tol: f64) -> Vec<CheckRow> {
    let b = l2_budget_report(&sim.trace, trigger);
    let d = decay_metrics(&sim.trace);
    let clean = sim.events.zeno_verdict == ZenoVerdict::Clean;
    let min_gap_ref = 10.0 * localization_tol;
    let min_gap = if sim.events.min_gap.is_finite() { sim.events.min_gap } else { sim.trace.horizon };
    vec![
        row("budget", b.lhs, b.rhs, b.eps_int, b.satisfied),
        row("min_event_gap", min_gap, min_gap_ref, 0.0, clean && min_gap >= min_gap_ref),
        row("event_count", sim.events.count as f64, 0.0, 0.0, clean),
        row("final_norm_ratio", d.final_norm_ratio, 0.0, 0.0, d.final_norm_ratio.is_finite()),
    ]
}

pub fn design_rows(r: &DesignReport, cfg: &DesignConfig) -> Vec<CheckRow> {
    let mut rows = vec![row("gate", r.gamma_opt * r.eta, 1.0, 0.0, r.gate_passed)];
    if !r.gate_passed {
        return rows;
    }
    if let (Some(v), Some(level)) = (r.gamma_verified, r.synthesis_level) {
        rows.push(row("gamma_verified", v, level, 0.0, v < level));
    }
    if let Some(m) = r.small_gain_margin {
        rows.push(row("small_gain_margin", m, 0.0, 0.0, m > 0.0));
    }
    if let Some(v) = &r.iqc {
        rows.push(row("frequency_condition", v.worst, 1.0, IQC_MARGIN, v.passed()));
    }
    if let (Some(sim), Some(t)) = (&r.simulation, &r.trigger) {
        rows.extend(simulation_rows(sim, t, cfg.sim.localization_tol()));
    }
    rows
}

fn status_from_rows(rows: &[CheckRow]) -> ExitStatus {
    if rows.iter().all(|r| r.pass) {
        ExitStatus::Success
    } else {
        ExitStatus::AcceptanceFailure
    }
}

fn write_simulation(ctx: &Context, prefix: &str, sim: &Simulation) -> Result<(), RunError> {
    output::write_trace(&ctx.path(&format!("{prefix}trace.csv")), &sim.trace)?;
    output::write_events(&ctx.path(&format!("{prefix}events.csv")), &sim.events)
}

/// Design only (plus the verification simulation unless disabled).
pub fn synth(file: &FileConfig, ctx: &Context) -> Result<ExitStatus, RunError> {
    std::fs::create_dir_all(&ctx.out)?;
    let cfg = file.design_config(&ctx.overrides)?;
    let report = pipeline::run_design(&cfg)?;
    let rows = design_rows(&report, &cfg);
    let mut text = design_summary("design", &report);
    text.push('\n');
    text.push_str(&rows_table(&rows));
    output::write_text(&ctx.path("report.txt"), &text)?;
    output::write_rows(&ctx.path("report.csv"), &rows)?;
    if let Some(k) = &report.controller {
        write_controller(&ctx.path("controller.toml"), k)?;
    }
    if let Some(sim) = &report.simulation {
        write_simulation(ctx, "", sim)?;
    }
    if !report.gate_passed {
        return Ok(ExitStatus::GateFailure);
    }
    Ok(status_from_rows(&rows))
}

fn setup_from_file(file: &FileConfig) -> Result<ClosedLoopSetup, RunError> {
    let (a, b, c) = file.plant_matrices()?;
    let d = Mat::zeros(c.nrows(), b.ncols());
    let plant = StateSpace::new(a, b, c, d)?;
    let controller = file.controller()?;
    let uncertainty = file.sim_uncertainty()?;
    let nxi = match &uncertainty {
        Uncertainty::None => 0,
        Uncertainty::Additive(d) | Uncertainty::Multiplicative(d) => d.states(),
    };
    Ok(ClosedLoopSetup {
        x0_plant: file.plant.x0.as_deref().map(vector).unwrap_or_else(|| Vector::from_element(plant.states(), 1.0)),
        x0_uncertainty: file.uncertainty.as_ref().and_then(|u| u.x0.as_deref()).map(vector).unwrap_or_else(|| Vector::zeros(nxi)),
        x0_controller: file.simulation.x0_controller.as_deref().map(vector).unwrap_or_else(|| Vector::zeros(controller.states())),
        x0_filter1: file.trigger.x0_filter1.as_deref().map(vector),
        x0_filter2: file.trigger.x0_filter2.as_deref().map(vector),
        trigger: file.explicit_trigger()?,
        plant,
        uncertainty,
        controller,
    })
}

/// Simulates a given controller and trigger.
pub fn simulate_cmd(file: &FileConfig, ctx: &Context) -> Result<ExitStatus, RunError> {
    std::fs::create_dir_all(&ctx.out)?;
    let setup = setup_from_file(file)?;
    let opts = file.sim_options(&ctx.overrides);
    let sim = simulate(&setup, file.horizon(&ctx.overrides), &opts)?;
    write_simulation(ctx, "", &sim)?;
    let rows = simulation_rows(&sim, &setup.trigger, opts.localization_tol());
    let mut text = String::from("== simulation ==\n");
    text.push_str(&event_summary(&sim.events));
    text.push('\n');
    for w in &sim.trace.warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    text.push('\n');
    text.push_str(&rows_table(&rows));
    output::write_text(&ctx.path("report.txt"), &text)?;
    output::write_rows(&ctx.path("report.csv"), &rows)?;
    Ok(status_from_rows(&rows))
}

/// Norm and frequency-condition checks for a given controller.
pub fn verify(file: &FileConfig, ctx: &Context) -> Result<ExitStatus, RunError> {
    std::fs::create_dir_all(&ctx.out)?;
    let (a, b, c) = file.plant_matrices()?;
    let k = file.controller()?;
    let kind = file.kind()?;
    let m = match kind {
        Kind::Additive => closed_loop_m(&a, &b, &c, &k)?.m,
        Kind::Multiplicative => closed_loop_mhat(&a, &b, &c, &k)?.m,
    };
    let eta = match (file.uncertainty_model()?, file.uncertainty.as_ref().and_then(|u| u.eta)) {
        (_, Some(e)) => e,
        (Some(d), None) => hinf_norm(&d, DEFAULT_NORM_REL_TOL)?.norm,
        (None, None) => 0.0,
    };
    let hurwitz = is_hurwitz(&m)?;
    let mut rows = vec![row("closed_loop_hurwitz", hurwitz as u8 as f64, 1.0, 0.0, hurwitz)];
    if hurwitz {
        let mnorm = hinf_norm(&m, DEFAULT_NORM_REL_TOL)?.norm;
        if file.trigger.kind.is_some() {
            match file.explicit_trigger()? {
                TriggerSpec::Static(t) => {
                    let g = static_gain(kind, t.omega1(), t.omega2(), eta)?;
                    rows.push(row("loop_gain", g * mnorm, 1.0, 0.0, g * mnorm < 1.0));
                }
                TriggerSpec::Dynamic(t) => {
                    let g = static_gain(kind, t.omega1(), t.omega2(), eta)?;
                    rows.push(row("loop_gain", g * mnorm, 1.0, 0.0, g * mnorm < 1.0));
                }
                TriggerSpec::Iqc(q) => {
                    let grid = match file.trigger.iqc_grid_points {
                        Some(n) => IqcGrid { points: n, ..IqcGrid::default() },
                        None => IqcGrid::default(),
                    };
                    let v = verify_iqc_condition(&m, q.g1(), q.g2(), eta, &grid)?;
                    rows.push(row("frequency_condition", v.worst, 1.0, IQC_MARGIN, v.passed()));
                    let scalar = (v.g1_norm * v.g1_norm + eta * eta).sqrt() * v.m_norm;
                    rows.push(row("scalar_condition", scalar, 1.0, 0.0, v.scalar_ok));
                }
            }
        }
        rows.insert(1, row("m_norm", mnorm, f64::NAN, 0.0, true));
    }
    let mut text = format!("== verification ==\neta: {eta:.6}\n\n");
    text.push_str(&rows_table(&rows));
    output::write_text(&ctx.path("report.txt"), &text)?;
    output::write_rows(&ctx.path("report.csv"), &rows)?;
    Ok(status_from_rows(&rows))
}

fn static_gain(kind: Kind, o1: &Mat, o2: &Mat, eta: f64) -> Result<f64, RunError> {
    Ok(match kind {
        Kind::Additive => gamma_static_additive(o1, o2, eta)?,
        Kind::Multiplicative => gamma_static_multiplicative(o1, o2, eta)?,
    })
}

fn apply_sim_settings(cfg: &mut DesignConfig, file: Option<&FileConfig>, ov: &Overrides) {
    if let Some(f) = file {
        cfg.sim = f.sim_options(ov);
        if let Some(h) = f.simulation.horizon {
            cfg.horizon = h;
        }
    } else if let Some(dt) = ov.dt {
        cfg.sim.dt = dt;
    }
    if let Some(h) = ov.horizon {
        cfg.horizon = h;
    }
    if let Some(s) = ov.seed {
        cfg.trigger.seed = s;
    }
}

/// The example configurations with the simulation settings of `file`
/// and the command-line overrides applied.
pub fn reference_configs(file: Option<&FileConfig>, ov: &Overrides) -> (DesignConfig, DesignConfig) {
    let mut a1 = reference::alg1_config();
    let mut a3 = reference::alg3_config();
    apply_sim_settings(&mut a1, file, ov);
    apply_sim_settings(&mut a3, file, ov);
    (a1, a3)
}

/// Runs the design example end to end and compares against the reported
/// values.
pub fn reproduce(file: Option<&FileConfig>, ctx: &Context) -> Result<ExitStatus, RunError> {
    std::fs::create_dir_all(&ctx.out)?;
    let (c1, c3) = reference_configs(file, &ctx.overrides);
    let rep = pipeline::reproduce_reference(&c1, &c3)?;
    for (prefix, r) in [("alg1_", &rep.alg1), ("alg3_", &rep.alg3)] {
        if let Some(sim) = &r.simulation {
            write_simulation(ctx, prefix, sim)?;
        }
        if let Some(k) = &r.controller {
            write_controller(&ctx.path(&format!("{prefix}controller.toml")), k)?;
        }
    }
    let mut text = design_summary("additive, static trigger", &rep.alg1);
    text.push('\n');
    text.push_str(&design_summary("additive, filtered dynamic trigger", &rep.alg3));
    text.push('\n');
    text.push_str(&rows_table(&rep.rows));
    output::write_text(&ctx.path("report.txt"), &text)?;
    output::write_rows(&ctx.path("report.csv"), &rep.rows)?;
    Ok(if rep.all_pass() { ExitStatus::Success } else { ExitStatus::AcceptanceFailure })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub safety: f64,
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn sweep_points(file: &FileConfig, base: &DesignConfig) -> Vec<SweepPoint> {
    let s = &file.sweep;
    let t = &base.trigger;
    let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let mut pts = Vec::new();
    for &safety in &or(&s.safety, t.safety) {
        for &mu in &or(&s.mu, t.mu) {
            for &nu in &or(&s.nu, t.nu) {
                for &alpha in &or(&s.alpha, t.alpha) {
                    for &beta in &or(&s.beta, t.beta) {
                        pts.push(SweepPoint { safety, mu, nu, alpha, beta });
                    }
                }
            }
        }
    }
    pts
}

struct SweepResult {
    index: usize,
    point: SweepPoint,
    outcome: Result<DesignReport, String>,
}

/// Runs the design over the parameter grid in `[sweep]` on worker threads.
pub fn sweep(file: &FileConfig, ctx: &Context) -> Result<ExitStatus, RunError> {
    std::fs::create_dir_all(&ctx.out)?;
    let base = file.design_config(&ctx.overrides)?;
    let points = sweep_points(file, &base);
    let threads = file
        .sweep
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, points.len().max(1));
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(points.len()));
    let write_errors = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&point) = points.get(i) else { break };
                let mut cfg = base.clone();
                cfg.trigger.safety = point.safety;
                cfg.trigger.mu = point.mu;
                cfg.trigger.nu = point.nu;
                cfg.trigger.alpha = point.alpha;
                cfg.trigger.beta = point.beta;
                let outcome = pipeline::run_design(&cfg).map_err(|e| e.to_string());
                if let Ok(Some(sim)) = outcome.as_ref().map(|r| r.simulation.as_ref()) {
                    if let Err(e) = write_simulation(ctx, &format!("sweep_{i:04}_"), sim) {
                        write_errors.lock().unwrap().push(e);
                    }
                }
                results.lock().unwrap().push(SweepResult { index: i, point, outcome });
            });
        }
    });
    if let Some(e) = write_errors.into_inner().unwrap().into_iter().next() {
        return Err(e);
    }
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|r| r.index);

    let mut w = csv::Writer::from_path(ctx.path("sweep.csv"))?;
    w.write_record([
        "index", "safety", "mu", "nu", "alpha", "beta", "gate_passed", "gamma_opt", "level", "gamma_verified", "events",
        "min_gap", "zeno", "final_ratio", "budget_ok", "error",
    ])?;
    let num = output::num;
    for r in &results {
        let p = r.point;
        let mut rec = vec![r.index.to_string(), num(p.safety), num(p.mu), num(p.nu), num(p.alpha), num(p.beta)];
        match &r.outcome {
            Ok(d) => {
                let sim = d.simulation.as_ref();
                rec.extend([
                    d.gate_passed.to_string(),
                    num(d.gamma_opt),
                    d.synthesis_level.map(num).unwrap_or_default(),
                    d.gamma_verified.map(num).unwrap_or_default(),
                    sim.map(|s| s.events.count.to_string()).unwrap_or_default(),
                    sim.map(|s| num(s.events.min_gap)).unwrap_or_default(),
                    sim.map(|s| format!("{:?}", s.events.zeno_verdict)).unwrap_or_default(),
                    d.decay.map(|x| num(x.final_norm_ratio)).unwrap_or_default(),
                    d.budget.map(|b| b.satisfied.to_string()).unwrap_or_default(),
                    String::new(),
                ]);
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 9));
                rec.push(e.clone());
            }
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(ExitStatus::Success)
}
