//! Trace, event-log and report writers.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use evtrig_core::pipeline::{CheckRow, DesignReport};
use evtrig_core::sim::{EventLog, SimulationTrace, TraceRow, ZenoVerdict};

use crate::RunError;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

pub fn trace_header(r: &TraceRow) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(names("xp", r.xp.len()));
    h.extend(names("xi", r.xi.len()));
    h.extend(names("xk", r.xk.len()));
    h.extend(names("y", r.y.len()));
    h.extend(names("u", r.u.len()));
    h.extend(names("yhat", r.yhat.len()));
    h.extend(names("uhat", r.uhat.len()));
    h.extend(names("epsy", r.eps_y.len()));
    h.extend(names("epsu", r.eps_u.len()));
    h.extend(names("g1x", r.x1.len()));
    h.extend(names("g2ix", r.x2.len()));
    h.extend(["chi", "f", "event"].map(String::from));
    h
}

fn trace_record(r: &TraceRow) -> Vec<String> {
    let mut out = vec![num(r.t)];
    for v in [&r.xp, &r.xi, &r.xk, &r.y, &r.u, &r.yhat, &r.uhat, &r.eps_y, &r.eps_u, &r.x1, &r.x2] {
        out.extend(v.iter().map(|&x| num(x)));
    }
    out.push(r.chi.map(num).unwrap_or_default());
    out.push(num(r.f));
    out.push(if r.event { "1" } else { "0" }.to_string());
    out
}

pub fn write_trace(path: &Path, trace: &SimulationTrace) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(first) = trace.rows.first() {
        w.write_record(trace_header(first))?;
    }
    for r in &trace.rows {
        w.write_record(trace_record(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events(path: &Path, log: &EventLog) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "t", "gap"])?;
    for (i, &t) in log.instants.iter().enumerate() {
        let gap = if i == 0 { String::new() } else { num(log.gaps[i - 1]) };
        w.write_record([i.to_string(), num(t), gap])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows(path: &Path, rows: &[CheckRow]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["name", "computed", "reference", "tolerance", "pass"])?;
    for r in rows {
        w.write_record([r.name.clone(), num(r.computed), num(r.reference), num(r.tolerance), r.pass.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

pub fn event_summary(log: &EventLog) -> String {
    let verdict = match log.zeno_verdict {
        ZenoVerdict::Clean => "clean",
        ZenoVerdict::GuardTripped => "guard tripped",
    };
    let mut s = format!("events: {} (min gap {:.3e} s, zeno guard: {verdict})", log.count, log.min_gap);
    if let Some(t) = log.stopped_at {
        let _ = write!(s, ", stopped at t = {t:.6}");
    }
    s
}

pub fn design_summary(title: &str, r: &DesignReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "== {title} ({:?}) ==", r.algorithm);
    let _ = writeln!(s, "eta: {:.6}{}", r.eta, r.delta_norm.map(|n| format!(" (||Delta|| = {n:.6})")).unwrap_or_default());
    let _ = writeln!(s, "gamma_opt: {:.6}", r.gamma_opt);
    let _ = writeln!(s, "gate: {} -> {}", r.gate, if r.gate_passed { "passed" } else { "failed" });
    if !r.gate_passed {
        return s;
    }
    if let Some(f) = &r.filters {
        let _ = writeln!(
            s,
            "filters: ||G1|| given {:.6}, used {:.6}{}; ||G2|| {:.6}; level upper end {:.6}",
            f.sigma1_given,
            f.sigma1,
            if f.scaled { " (rescaled)" } else { "" },
            f.g2_norm,
            f.gamma_max
        );
    }
    let _ = writeln!(s, "trigger gain: {}", opt(r.trigger_gain));
    let _ = writeln!(s, "synthesis level: {}", opt(r.synthesis_level));
    if let Some(k) = &r.controller {
        let _ = writeln!(s, "controller order: {}", k.states());
    }
    let _ = writeln!(s, "||M|| verified: {} (closed loop Hurwitz: {:?})", opt(r.gamma_verified), r.closed_loop_hurwitz);
    let _ = writeln!(s, "small-gain margin: {}", opt(r.small_gain_margin));
    if let Some(v) = &r.iqc {
        let _ = writeln!(
            s,
            "frequency condition: worst {:.6} at {:.4} rad/s -> {}; scalar test {}",
            v.worst,
            v.worst_omega,
            if v.passed() { "holds" } else { "violated" },
            if v.scalar_ok { "holds" } else { "violated" }
        );
    }
    let _ = writeln!(s, "design verified: {}", r.design_verified);
    if let Some(sim) = &r.simulation {
        let _ = writeln!(s, "{}", event_summary(&sim.events));
    }
    if let Some(d) = &r.decay {
        let _ = writeln!(s, "final state ratio: {:.3e}, settle time: {}", d.final_norm_ratio, opt(d.settle_time));
    }
    if let Some(b) = &r.budget {
        let _ = writeln!(
            s,
            "budget: {:.6e} <= {:.6e} + {:.1e} -> {}",
            b.lhs,
            b.rhs,
            b.eps_int,
            if b.satisfied { "satisfied" } else { "violated" }
        );
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub fn rows_table(rows: &[CheckRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<34} {:>14} {:>12} {:>10}  result", "quantity", "computed", "reference", "tol");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<34} {:>14.6} {:>12.6} {:>10.2e}  {}",
            r.name,
            r.computed,
            r.reference,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    s
}
