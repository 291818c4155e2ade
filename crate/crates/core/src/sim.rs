//! Closed-loop simulation of plant, uncertainty, controller and the two
//! jointly triggered samplers.
//!
//! The plant is driven by the held input `û`, the controller by the held
//! output `ŷ`. Between events the stacked state is integrated with a
//! fixed-step RK4 scheme; an event fires when the triggering function
//! becomes positive and is located by bisection on the step.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{block, mul, mul3, Mat, Vector};
use crate::statespace::StateSpace;
use crate::trigger::{eval_dynamic, eval_iqc, eval_static, TriggerSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Uncertainty {
    None,
    /// `d = Δ(û)`, `y = C x_p + d`.
    Additive(StateSpace),
    /// `λ = C x_p`, `d = Δ(λ)`, `y = λ + d`.
    Multiplicative(StateSpace),
}

impl Uncertainty {
    fn model(&self) -> Option<&StateSpace> {
        match self {
            Uncertainty::None => None,
            Uncertainty::Additive(s) | Uncertainty::Multiplicative(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSetup {
    pub plant: StateSpace,
    pub uncertainty: Uncertainty,
    pub controller: StateSpace,
    pub trigger: TriggerSpec,
    pub x0_plant: Vector,
    pub x0_uncertainty: Vector,
    pub x0_controller: Vector,
    /// Initial `G₁` / `G₂⁻¹` states for the IQC trigger (zeros if `None`).
    pub x0_filter1: Option<Vector>,
    pub x0_filter2: Option<Vector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZenoPolicy {
    /// Stop at the first guard trip.
    Stop,
    /// Suppress detection for `dt_min` after each event and keep going.
    Refractory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub dt_record: f64,
    pub f_tol: f64,
    /// Event-time tolerance as a fraction of `dt`.
    pub localization_rel: f64,
    /// Minimum admissible gap as a fraction of `dt`.
    pub zeno_rel: f64,
    pub zeno_policy: ZenoPolicy,
    pub max_events: usize,
    pub divergence_bound: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            dt_record: 1e-3,
            f_tol: 1e-9,
            localization_rel: 1e-6,
            zeno_rel: 1e-3,
            zeno_policy: ZenoPolicy::Stop,
            max_events: 1_000_000,
            divergence_bound: 1e12,
        }
    }
}

impl SimOptions {
    pub fn localization_tol(&self) -> f64 {
        self.dt * self.localization_rel
    }
    pub fn dt_min(&self) -> f64 {
        self.dt * self.zeno_rel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub xp: Vector,
    pub xi: Vector,
    pub xk: Vector,
    pub chi: Option<f64>,
    pub x1: Vector,
    pub x2: Vector,
    pub y: Vector,
    pub u: Vector,
    pub yhat: Vector,
    pub uhat: Vector,
    pub eps_y: Vector,
    pub eps_u: Vector,
    pub f: f64,
    /// Post-jump row of an event. The matching pre-jump row carries the
    /// same `t` with the old holds.
    pub event: bool,
}

/// Trapezoidal integrals accumulated at the integration step, split at
/// events so that each piece is smooth.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BudgetIntegrals {
    /// `∫‖ε‖²`, or `∫‖ε̄‖²` for the IQC trigger.
    pub lhs: f64,
    /// `∫vᵀΩv`, or `∫‖v̄‖²` for the IQC trigger.
    pub rhs: f64,
    /// Quadrature error budget from second differences of the integrands.
    pub eps_int: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub rows: Vec<TraceRow>,
    pub dt: f64,
    pub dt_record: f64,
    pub horizon: f64,
    pub integrals: BudgetIntegrals,
    /// Largest `f` seen at accepted step ends between events.
    pub max_f_flow: f64,
    /// Smallest `χ` seen at accepted step ends (`None` for static triggers).
    pub min_chi: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZenoVerdict {
    Clean,
    GuardTripped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub instants: Vec<f64>,
    pub gaps: Vec<f64>,
    pub min_gap: f64,
    pub count: usize,
    pub zeno_verdict: ZenoVerdict,
    /// Time at which a `Stop` policy ended the run early.
    pub stopped_at: Option<f64>,
}

impl EventLog {
    fn new() -> Self {
        Self { instants: Vec::new(), gaps: Vec::new(), min_gap: f64::INFINITY, count: 0, zeno_verdict: ZenoVerdict::Clean, stopped_at: None }
    }

    /// Events in `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> EventLog {
        let instants: Vec<f64> = self.instants.iter().copied().filter(|&t| t >= t0 && t <= t1).collect();
        let gaps: Vec<f64> = instants.windows(2).map(|w| w[1] - w[0]).collect();
        let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        EventLog {
            count: instants.len(),
            instants,
            gaps,
            min_gap,
            zeno_verdict: self.zeno_verdict,
            stopped_at: self.stopped_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub trace: SimulationTrace,
    pub events: EventLog,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    np: usize,
    nxi: usize,
    nk: usize,
    nchi: usize,
    n1: usize,
    n2: usize,
}

impl Layout {
    fn xi(&self) -> usize {
        self.np
    }
    fn xk(&self) -> usize {
        self.np + self.nxi
    }
    fn chi(&self) -> usize {
        self.xk() + self.nk
    }
    fn x1(&self) -> usize {
        self.chi() + self.nchi
    }
    fn x2(&self) -> usize {
        self.x1() + self.n1
    }
    fn len(&self) -> usize {
        self.x2() + self.n2
    }
}

#[derive(Debug, Clone)]
struct Holds {
    yhat: Vector,
    uhat: Vector,
}

struct Eval {
    y: Vector,
    u: Vector,
    eps: Vector,
    f: f64,
    dz: Vector,
    lhs: f64,
    rhs: f64,
}

struct Loop<'a> {
    s: &'a ClosedLoopSetup,
    lay: Layout,
    p: usize,
    m: usize,
}

fn seg(z: &Vector, off: usize, len: usize) -> Vector {
    z.rows(off, len).into_owned()
}

fn concat(a: &Vector, b: &Vector) -> Vector {
    let mut v = Vector::zeros(a.len() + b.len());
    v.rows_mut(0, a.len()).copy_from(a);
    v.rows_mut(a.len(), b.len()).copy_from(b);
    v
}

impl<'a> Loop<'a> {
    fn new(s: &'a ClosedLoopSetup) -> Result<Self> {
        let (n, m, p) = (s.plant.states(), s.plant.inputs(), s.plant.outputs());
        let bad = |msg: String| Err(Error::Structural(msg));
        if s.controller.inputs() != p || s.controller.outputs() != m {
            return bad(format!(
                "controller is {}x{} but the plant needs {}x{}",
                s.controller.outputs(),
                s.controller.inputs(),
                m,
                p
            ));
        }
        let nxi = match &s.uncertainty {
            Uncertainty::None => 0,
            Uncertainty::Additive(d) => {
                if d.inputs() != m || d.outputs() != p {
                    return bad(format!("additive uncertainty must be {p}x{m}"));
                }
                d.states()
            }
            Uncertainty::Multiplicative(d) => {
                if d.inputs() != p || d.outputs() != p {
                    return bad(format!("multiplicative uncertainty must be {p}x{p}"));
                }
                d.states()
            }
        };
        match &s.trigger {
            TriggerSpec::Static(t) if t.omega1().nrows() != p || t.omega2().nrows() != m => {
                return bad(format!("trigger weights must be {p}x{p} and {m}x{m}"));
            }
            TriggerSpec::Dynamic(t) if t.omega1().nrows() != p || t.omega2().nrows() != m => {
                return bad(format!("trigger weights must be {p}x{p} and {m}x{m}"));
            }
            TriggerSpec::Iqc(t) if t.width() != p + m => {
                return bad(format!("IQC filters must have width {}", p + m));
            }
            _ => {}
        }
        let (nchi, n1, n2) = match &s.trigger {
            TriggerSpec::Static(_) => (0, 0, 0),
            TriggerSpec::Dynamic(_) => (1, 0, 0),
            TriggerSpec::Iqc(q) => (1, q.g1().states(), q.g2_inv().states()),
        };
        if s.x0_plant.len() != n || s.x0_uncertainty.len() != nxi || s.x0_controller.len() != s.controller.states() {
            return bad("initial state lengths do not match the models".into());
        }
        let lay = Layout { np: n, nxi, nk: s.controller.states(), nchi, n1, n2 };
        Ok(Self { s, lay, p, m })
    }

    fn initial_state(&self) -> Result<Vector> {
        let l = &self.lay;
        let mut z = Vector::zeros(l.len());
        z.rows_mut(0, l.np).copy_from(&self.s.x0_plant);
        z.rows_mut(l.xi(), l.nxi).copy_from(&self.s.x0_uncertainty);
        z.rows_mut(l.xk(), l.nk).copy_from(&self.s.x0_controller);
        let ts = self.s.trigger.initial_state(self.s.x0_filter1.clone(), self.s.x0_filter2.clone())?;
        if l.nchi == 1 {
            z[l.chi()] = ts.chi;
        }
        z.rows_mut(l.x1(), l.n1).copy_from(&ts.x1);
        z.rows_mut(l.x2(), l.n2).copy_from(&ts.x2);
        Ok(z)
    }

    fn eval(&self, t: f64, z: &Vector, h: &Holds) -> Eval {
        let l = &self.lay;
        let plant = &self.s.plant;
        let k = &self.s.controller;
        let xp = seg(z, 0, l.np);
        let xi = seg(z, l.xi(), l.nxi);
        let xk = seg(z, l.xk(), l.nk);
        let mut dz = Vector::zeros(l.len());

        let lambda = plant.c() * &xp + plant.d() * &h.uhat;
        dz.rows_mut(0, l.np).copy_from(&(plant.a() * &xp + plant.b() * &h.uhat));
        let y = match &self.s.uncertainty {
            Uncertainty::None => lambda,
            Uncertainty::Additive(d) => {
                dz.rows_mut(l.xi(), l.nxi).copy_from(&(d.a() * &xi + d.b() * &h.uhat));
                lambda + d.c() * &xi + d.d() * &h.uhat
            }
            Uncertainty::Multiplicative(d) => {
                dz.rows_mut(l.xi(), l.nxi).copy_from(&(d.a() * &xi + d.b() * &lambda));
                let dd = d.c() * &xi + d.d() * &lambda;
                lambda + dd
            }
        };
        dz.rows_mut(l.xk(), l.nk).copy_from(&(k.a() * &xk + k.b() * &h.yhat));
        let u = k.c() * &xk + k.d() * &h.yhat;
        let eps = concat(&(&h.yhat - &y), &(&h.uhat - &u));
        let v = concat(&h.yhat, &h.uhat);

        let (f, lhs, rhs) = match &self.s.trigger {
            TriggerSpec::Static(tr) => {
                let q = v.dot(&(tr.omega() * &v));
                (eval_static(tr, &eps, &v, t), eps.norm_squared(), q)
            }
            TriggerSpec::Dynamic(tr) => {
                let chi = z[l.chi()];
                let e = eval_dynamic(tr, &eps, &v, chi);
                dz[l.chi()] = e.chi_dot;
                (e.f, eps.norm_squared(), v.dot(&(tr.omega() * &v)))
            }
            TriggerSpec::Iqc(tr) => {
                let chi = z[l.chi()];
                let x1 = seg(z, l.x1(), l.n1);
                let x2 = seg(z, l.x2(), l.n2);
                let (g1, g2i) = (tr.g1(), tr.g2_inv());
                dz.rows_mut(l.x1(), l.n1).copy_from(&(g1.a() * &x1 + g1.b() * &v));
                dz.rows_mut(l.x2(), l.n2).copy_from(&(g2i.a() * &x2 + g2i.b() * &eps));
                let vbar = g1.c() * &x1 + g1.d() * &v;
                let epsbar = g2i.c() * &x2 + g2i.d() * &eps;
                let e = eval_iqc(tr, &epsbar, &vbar, chi);
                dz[l.chi()] = e.chi_dot;
                (e.f, epsbar.norm_squared(), vbar.norm_squared())
            }
        };
        Eval { y, u, eps, f, dz, lhs, rhs }
    }

    fn rk4(&self, t: f64, z: &Vector, h: &Holds, step: f64) -> Vector {
        let k1 = self.eval(t, z, h).dz;
        let k2 = self.eval(t + step / 2.0, &(z + &k1 * (step / 2.0)), h).dz;
        let k3 = self.eval(t + step / 2.0, &(z + &k2 * (step / 2.0)), h).dz;
        let k4 = self.eval(t + step, &(z + &k3 * step), h).dz;
        z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0)
    }

    /// Samples `y`, recomputes `u` with the fresh `ŷ`, then samples `û`.
    fn jump(&self, t: f64, z: &mut Vector, h: &mut Holds) {
        let e = self.eval(t, z, h);
        h.yhat = e.y;
        let k = &self.s.controller;
        let xk = seg(z, self.lay.xk(), self.lay.nk);
        h.uhat = k.c() * &xk + k.d() * &h.yhat;
        if let TriggerSpec::Iqc(q) = &self.s.trigger {
            if q.reset_g2_inv_on_event {
                z.rows_mut(self.lay.x2(), self.lay.n2).fill(0.0);
            }
        }
    }

    fn row(&self, t: f64, z: &Vector, h: &Holds, e: &Eval, event: bool) -> TraceRow {
        let l = &self.lay;
        TraceRow {
            t,
            xp: seg(z, 0, l.np),
            xi: seg(z, l.xi(), l.nxi),
            xk: seg(z, l.xk(), l.nk),
            chi: (l.nchi == 1).then(|| z[l.chi()]),
            x1: seg(z, l.x1(), l.n1),
            x2: seg(z, l.x2(), l.n2),
            y: e.y.clone(),
            u: e.u.clone(),
            yhat: h.yhat.clone(),
            uhat: h.uhat.clone(),
            eps_y: seg(&e.eps, 0, self.p),
            eps_u: seg(&e.eps, self.p, self.m),
            f: e.f,
            event,
        }
    }
}

/// Running trapezoid with a second-difference error estimate.
#[derive(Default)]
struct Quadrature {
    acc: BudgetIntegrals,
    prev: Option<(f64, f64, f64)>,
}

impl Quadrature {
    fn reset(&mut self) {
        self.prev = None;
    }
    /// Adds the piece `[t, t+h]` with integrand values `a` (start) and `b`
    /// (end), each `(lhs, rhs)`.
    fn add(&mut self, h: f64, a: (f64, f64), b: (f64, f64)) {
        self.acc.lhs += h / 2.0 * (a.0 + b.0);
        self.acc.rhs += h / 2.0 * (a.1 + b.1);
        if let Some((hp, l0, r0)) = self.prev {
            if (hp - h).abs() <= 1e-9 * h {
                let d2 = (b.0 - 2.0 * a.0 + l0).abs() + (b.1 - 2.0 * a.1 + r0).abs();
                // h³/12·|g''| per piece, doubled for safety
                self.acc.eps_int += h * d2 / 6.0;
            }
        }
        self.prev = Some((h, a.0, a.1));
    }
}

fn check_finite(z: &Vector, t: f64, bound: f64) -> Result<()> {
    if z.iter().all(|x| x.is_finite() && x.abs() <= bound) {
        Ok(())
    } else {
        Err(Error::Divergence { t })
    }
}

/// Runs the closed loop on `[0, horizon]`. An event is forced at `t = 0`
/// to initialize the holds.
pub fn simulate(setup: &ClosedLoopSetup, horizon: f64, opts: &SimOptions) -> Result<Simulation> {
    if !(opts.dt > 0.0) || !(horizon >= 0.0) || !(opts.dt_record > 0.0) {
        return Err(Error::InvalidParameter("dt, dt_record must be positive and the horizon nonnegative".into()));
    }
    let lp = Loop::new(setup)?;
    let mut warnings = Vec::new();
    if let Some(d) = setup.uncertainty.model() {
        if d.d().amax() > 0.0 {
            warnings.push(String::from("uncertainty has a nonzero feedthrough; y moves with û at sampling instants"));
        }
    }
    if setup.plant.d().amax() > 0.0 {
        warnings.push(String::from("plant has a nonzero feedthrough; y moves with û at sampling instants"));
    }

    let steps = (horizon / opts.dt).round() as usize;
    let record_every = ((opts.dt_record / opts.dt).round() as usize).max(1);
    let tol = opts.localization_tol();
    let dt_min = opts.dt_min();

    let mut z = lp.initial_state()?;
    check_finite(&z, 0.0, opts.divergence_bound)?;
    let mut holds = Holds { yhat: Vector::zeros(lp.p), uhat: Vector::zeros(lp.m) };
    let mut rows = Vec::new();
    let mut log = EventLog::new();
    let mut quad = Quadrature::default();
    let mut max_f_flow = f64::NEG_INFINITY;
    let mut min_chi: Option<f64> = None;
    let mut suppress_until = f64::NEG_INFINITY;
    let track_chi = |z: &Vector, min_chi: &mut Option<f64>| {
        if lp.lay.nchi == 1 {
            let c = z[lp.lay.chi()];
            *min_chi = Some(min_chi.map_or(c, |m: f64| m.min(c)));
        }
    };
    track_chi(&z, &mut min_chi);

    // returns false when the run must stop
    let do_event = |t: f64,
                        z: &mut Vector,
                        holds: &mut Holds,
                        rows: &mut Vec<TraceRow>,
                        log: &mut EventLog,
                        suppress_until: &mut f64,
                        pre_row: bool|
     -> bool {
        if pre_row {
            let e = lp.eval(t, z, holds);
            rows.push(lp.row(t, z, holds, &e, false));
        }
        lp.jump(t, z, holds);
        let e = lp.eval(t, z, holds);
        rows.push(lp.row(t, z, holds, &e, true));
        if let Some(&last) = log.instants.last() {
            let gap = t - last;
            log.gaps.push(gap);
            log.min_gap = log.min_gap.min(gap);
            if gap < dt_min {
                log.zeno_verdict = ZenoVerdict::GuardTripped;
            }
        }
        log.instants.push(t);
        log.count += 1;
        if log.count >= opts.max_events {
            log.zeno_verdict = ZenoVerdict::GuardTripped;
            log.stopped_at = Some(t);
            return false;
        }
        if log.zeno_verdict == ZenoVerdict::GuardTripped || e.f > opts.f_tol {
            log.zeno_verdict = ZenoVerdict::GuardTripped;
            if opts.zeno_policy == ZenoPolicy::Stop {
                log.stopped_at = Some(t);
                return false;
            }
            *suppress_until = t + dt_min;
        }
        true
    };

    if !do_event(0.0, &mut z, &mut holds, &mut rows, &mut log, &mut suppress_until, false) {
        return Ok(finish(rows, log, quad, max_f_flow, min_chi, warnings, opts, horizon));
    }

    for i in 0..steps {
        let target = (i + 1) as f64 * opts.dt;
        let mut t = i as f64 * opts.dt;
        let mut cur = lp.eval(t, &z, &holds);
        loop {
            let h = target - t;
            if h <= 0.0 {
                break;
            }
            let znew = lp.rk4(t, &z, &holds, h);
            check_finite(&znew, t, opts.divergence_bound)?;
            let enew = lp.eval(target, &znew, &holds);
            let detect = target > suppress_until;
            if !(detect && enew.f > 0.0) {
                quad.add(h, (cur.lhs, cur.rhs), (enew.lhs, enew.rhs));
                z = znew;
                max_f_flow = max_f_flow.max(enew.f);
                track_chi(&z, &mut min_chi);
                break;
            }
            // event inside (t, target]: bisect on the step length
            let (mut lo, mut hi) = (0.0, h);
            if cur.f > 0.0 {
                hi = 0.0;
            }
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let zm = lp.rk4(t, &z, &holds, mid);
                if lp.eval(t + mid, &zm, &holds).f > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let te = t + hi;
            let ze = if hi > 0.0 { lp.rk4(t, &z, &holds, hi) } else { z.clone() };
            check_finite(&ze, te, opts.divergence_bound)?;
            if hi > 0.0 {
                let ee = lp.eval(te, &ze, &holds);
                quad.add(hi, (cur.lhs, cur.rhs), (ee.lhs, ee.rhs));
            }
            quad.reset();
            z = ze;
            t = te;
            track_chi(&z, &mut min_chi);
            if !do_event(t, &mut z, &mut holds, &mut rows, &mut log, &mut suppress_until, true) {
                return Ok(finish(rows, log, quad, max_f_flow, min_chi, warnings, opts, horizon));
            }
            cur = lp.eval(t, &z, &holds);
        }
        if (i + 1) % record_every == 0 {
            let e = lp.eval(target, &z, &holds);
            rows.push(lp.row(target, &z, &holds, &e, false));
        }
    }
    Ok(finish(rows, log, quad, max_f_flow, min_chi, warnings, opts, horizon))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    rows: Vec<TraceRow>,
    log: EventLog,
    quad: Quadrature,
    max_f_flow: f64,
    min_chi: Option<f64>,
    warnings: Vec<String>,
    opts: &SimOptions,
    horizon: f64,
) -> Simulation {
    Simulation {
        trace: SimulationTrace {
            rows,
            dt: opts.dt,
            dt_record: opts.dt_record,
            horizon,
            integrals: quad.acc,
            max_f_flow,
            min_chi,
            warnings,
        },
        events: log,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    pub lhs: f64,
    /// Signal integral plus the trigger's defect term.
    pub rhs: f64,
    pub eps_int: f64,
    pub satisfied: bool,
}

/// `∫‖ε‖² ≤ ∫vᵀΩv + defect + ε_int` (filtered signals for the IQC trigger).
pub fn l2_budget_report(trace: &SimulationTrace, trigger: &TriggerSpec) -> BudgetReport {
    let q = trace.integrals;
    let rhs = q.rhs + trigger.defect();
    BudgetReport { lhs: q.lhs, rhs, eps_int: q.eps_int, satisfied: q.lhs <= rhs + q.eps_int }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayMetrics {
    /// First time after which `‖(x_p, ξ, x_k)‖` stays below 1% of its
    /// initial value; `None` if it never settles.
    pub settle_time: Option<f64>,
    pub final_norm_ratio: f64,
    /// The initial state is zero, so the ratio is reported as 0.
    pub undefined: bool,
}

fn loop_norm(r: &TraceRow) -> f64 {
    (r.xp.norm_squared() + r.xi.norm_squared() + r.xk.norm_squared()).sqrt()
}

pub fn decay_metrics(trace: &SimulationTrace) -> DecayMetrics {
    let (Some(first), Some(last)) = (trace.rows.first(), trace.rows.last()) else {
        return DecayMetrics { settle_time: None, final_norm_ratio: 0.0, undefined: true };
    };
    let n0 = loop_norm(first);
    if n0 == 0.0 {
        return DecayMetrics { settle_time: Some(0.0), final_norm_ratio: 0.0, undefined: true };
    }
    let mut settle = None;
    for r in trace.rows.iter().rev() {
        if loop_norm(r) > 0.01 * n0 {
            break;
        }
        settle = Some(r.t);
    }
    DecayMetrics { settle_time: settle, final_norm_ratio: loop_norm(last) / n0, undefined: false }
}

/// `A_cl` of plant and controller in continuous feedback (`ŷ = y`, `û = u`),
/// without uncertainty. The plant must be strictly proper.
pub fn continuous_closed_loop(plant: &StateSpace, k: &StateSpace) -> Result<Mat> {
    if plant.d().amax() > 0.0 {
        return Err(Error::Structural("plant must be strictly proper".into()));
    }
    let (a, b, c) = (plant.a(), plant.b(), plant.c());
    let top_l = a + mul3(b, k.d(), c);
    let top_r = mul(b, k.c());
    let bot_l = mul(k.b(), c);
    Ok(block(&[&[&top_l, &top_r], &[&bot_l, k.a()]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eye;
    use crate::trigger::{DynamicTrigger, IqcTrigger, StaticTrigger};
    use approx::assert_relative_eq;

    fn paper_plant() -> StateSpace {
        StateSpace::from_rows(2, 1, 1, &[-12.5, 5.9, -7.1, 13.8], &[1.0, 2.0], &[-4.0, 5.5], &[0.0]).unwrap()
    }

    fn paper_delta() -> StateSpace {
        StateSpace::from_rows(2, 1, 1, &[-15.4, 10.7, -15.7, -1.41], &[-1.24, -1.28], &[1.165, -2.07], &[0.0]).unwrap()
    }

    /// 1-state controller printed with the additive design example.
    fn example_k() -> StateSpace {
        StateSpace::from_rows(1, 1, 1, &[-11.9130], &[-0.7953], &[-3.5437], &[-1.8130]).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn setup(trigger: TriggerSpec, unc: Uncertainty) -> ClosedLoopSetup {
        let nxi = unc.model().map_or(0, |d| d.states());
        ClosedLoopSetup {
            plant: paper_plant(),
            uncertainty: unc,
            controller: example_k(),
            trigger,
            x0_plant: v(&[1.0, -1.0]),
            x0_uncertainty: Vector::zeros(nxi),
            x0_controller: Vector::zeros(1),
            x0_filter1: None,
            x0_filter2: None,
        }
    }

    fn static_trigger(w1: f64, w2: f64, mu: f64) -> TriggerSpec {
        TriggerSpec::Static(StaticTrigger::new(eye(1) * w1, eye(1) * w2, mu, 5.0).unwrap())
    }

    fn hold_invariant(sim: &Simulation) {
        let rows = &sim.trace.rows;
        for w in rows.windows(2) {
            let changed = w[0].yhat != w[1].yhat || w[0].uhat != w[1].uhat;
            if changed {
                assert!(w[1].event, "hold changed without an event at t={}", w[1].t);
            }
        }
        for r in rows.iter().filter(|r| r.event) {
            assert!(r.eps_y.iter().chain(r.eps_u.iter()).all(|&e| e == 0.0));
        }
    }

    #[test]
    fn never_triggering_holds_initial_samples() {
        let s = setup(static_trigger(1e6, 1e6, 1e6), Uncertainty::None);
        let sim = simulate(&s, 0.3, &SimOptions::default()).unwrap();
        assert_eq!(sim.events.count, 1);
        let r0 = &sim.trace.rows[0];
        assert!(r0.event);
        assert_eq!(r0.yhat[0], -4.0 - 5.5, "{:?}", r0);
        for r in &sim.trace.rows {
            assert_eq!(r.yhat, r0.yhat);
            assert_eq!(r.uhat, r0.uhat);
        }
        let b = l2_budget_report(&sim.trace, &s.trigger);
        assert!(b.satisfied);
    }

    #[test]
    fn static_run_invariants() {
        let s = setup(static_trigger(0.1041, 0.0920, 0.1), Uncertainty::Additive(paper_delta()));
        let opts = SimOptions::default();
        let sim = simulate(&s, 1.5, &opts).unwrap();
        assert!(sim.events.count > 3);
        assert_eq!(sim.events.zeno_verdict, ZenoVerdict::Clean);
        assert!(sim.events.min_gap >= 10.0 * opts.localization_tol());
        assert!(sim.trace.max_f_flow <= opts.f_tol);
        hold_invariant(&sim);
        let b = l2_budget_report(&sim.trace, &s.trigger);
        assert!(b.satisfied, "{b:?}");
        // pre-jump rows sit on the threshold
        for w in sim.trace.rows.windows(2).filter(|w| w[1].event) {
            assert_eq!(w[0].t, w[1].t);
            assert!(w[0].f.abs() < 1e-6, "{}", w[0].f);
        }
    }

    #[test]
    fn dynamic_chi_stays_positive() {
        let d = DynamicTrigger::new(eye(1) * 0.1, eye(1) * 0.09, 2.5, 1.0, 1.0).unwrap();
        let s = setup(TriggerSpec::Dynamic(d), Uncertainty::Additive(paper_delta()));
        let sim = simulate(&s, 2.0, &SimOptions::default()).unwrap();
        assert!(sim.trace.min_chi.unwrap() > 0.0);
        assert!(l2_budget_report(&sim.trace, &s.trigger).satisfied);
        hold_invariant(&sim);
    }

    #[test]
    fn iqc_with_static_filters_matches_dynamic_run() {
        let sigma = 0.3;
        let q = IqcTrigger::new(
            StateSpace::gain(eye(2) * sigma).unwrap(),
            StateSpace::gain(eye(2)).unwrap(),
            2.5,
            1.0,
            1.0,
        )
        .unwrap();
        let d = DynamicTrigger::new(eye(1) * sigma * sigma, eye(1) * sigma * sigma, 2.5, 1.0, 1.0).unwrap();
        let a = simulate(&setup(TriggerSpec::Iqc(q), Uncertainty::None), 1.0, &SimOptions::default()).unwrap();
        let b = simulate(&setup(TriggerSpec::Dynamic(d), Uncertainty::None), 1.0, &SimOptions::default()).unwrap();
        assert_eq!(a.events.count, b.events.count);
        for (x, y) in a.events.instants.iter().zip(&b.events.instants) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn rk4_order_on_event_free_run() {
        // no events: the loop is linear with constant holds
        let s = setup(static_trigger(1e6, 1e6, 1e6), Uncertainty::Additive(paper_delta()));
        let run = |dt: f64| {
            let o = SimOptions { dt, dt_record: 0.1, ..SimOptions::default() };
            simulate(&s, 0.5, &o).unwrap().trace.rows.last().unwrap().xp.clone()
        };
        let (a, b, c) = (run(4e-3), run(2e-3), run(1e-3));
        let ratio = (&a - &b).norm() / (&b - &c).norm();
        assert!((ratio - 16.0).abs() < 2.0, "{ratio}");
    }

    #[test]
    fn quadrature_is_second_order() {
        let s = setup(static_trigger(1e6, 1e6, 1e6), Uncertainty::None);
        let lhs = |dt: f64| {
            let o = SimOptions { dt, dt_record: 0.1, ..SimOptions::default() };
            simulate(&s, 0.5, &o).unwrap().trace.integrals.lhs
        };
        let (a, b, c) = (lhs(4e-3), lhs(2e-3), lhs(1e-3));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn decay_matches_modal_bound_without_uncertainty() {
        // continuous feedback through samplers that fire on every step
        let k = example_k();
        let s = ClosedLoopSetup { controller: k.clone(), ..setup(static_trigger(1e-6, 1e-6, 1e-8), Uncertainty::None) };
        let acl = continuous_closed_loop(&s.plant, &k).unwrap();
        let alpha = crate::linalg::eigenvalues(&acl).unwrap().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(alpha < 0.0);
        let sim = simulate(&s, 2.0, &SimOptions::default()).unwrap();
        assert_eq!(sim.events.zeno_verdict, ZenoVerdict::Clean);
        let m = decay_metrics(&sim.trace);
        assert!(!m.undefined);
        // generous cond factor for the non-normal closed loop
        assert!(m.final_norm_ratio <= 100.0 * (alpha * 2.0).exp(), "{} vs {} {:?}", m.final_norm_ratio, (alpha * 2.0).exp(), (sim.events.count, sim.events.stopped_at, sim.events.zeno_verdict, sim.events.min_gap));
    }

    #[test]
    fn zero_initial_state_reports_undefined_ratio() {
        let mut s = setup(static_trigger(0.1, 0.1, 0.1), Uncertainty::None);
        s.x0_plant = Vector::zeros(2);
        let sim = simulate(&s, 0.2, &SimOptions::default()).unwrap();
        let m = decay_metrics(&sim.trace);
        assert!(m.undefined);
        assert_eq!(m.final_norm_ratio, 0.0);
        assert_eq!(sim.events.count, 1);
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let mut s = setup(static_trigger(0.1, 0.1, 0.1), Uncertainty::None);
        s.controller = StateSpace::gain(Mat::zeros(2, 1)).unwrap();
        assert!(matches!(simulate(&s, 0.1, &SimOptions::default()), Err(Error::Structural(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let mut s = setup(static_trigger(1e6, 1e6, 1e6), Uncertainty::None);
        s.controller = StateSpace::gain(Mat::zeros(1, 1)).unwrap();
        s.x0_controller = Vector::zeros(0);
        let opts = SimOptions { divergence_bound: 1e3, ..SimOptions::default() };
        match simulate(&s, 5.0, &opts) {
            Err(Error::Divergence { t }) => assert!(t > 0.0 && t < 5.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let s = setup(static_trigger(0.1041, 0.0920, 0.1), Uncertainty::Additive(paper_delta()));
        let a = simulate(&s, 0.5, &SimOptions::default()).unwrap();
        let b = simulate(&s, 0.5, &SimOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a.trace.rows[0].t, 0.0);
    }
}
