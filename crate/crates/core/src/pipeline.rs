//! End-to-end design procedures.
//!
//! * `Alg1`: additive uncertainty, static trigger.
//! * `Alg2`: multiplicative uncertainty, static trigger.
//! * `Alg3`: additive uncertainty, dynamic trigger on `G₁`/`G₂⁻¹`-filtered
//!   signals.
//!
//! Each run computes the optimal level, checks the gate, picks the trigger
//! parameters, synthesizes `K`, re-verifies the closed loop and optionally
//! simulates it.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::{build_p_add, build_p_mul, closed_loop_m, closed_loop_mhat, AugmentedPlant, Kind};
use crate::hinf::{hinf_norm, hinf_opt_gamma, hinf_syn, DEFAULT_GAMMA_REL_TOL, DEFAULT_NORM_REL_TOL};
use crate::linalg::{eye, Mat, Vector};
use crate::sim::{
    decay_metrics, l2_budget_report, simulate, BudgetReport, ClosedLoopSetup, DecayMetrics, SimOptions, Simulation,
    Uncertainty,
};
use crate::statespace::{self, invert_realization, StateSpace};
use crate::trigger::{
    design_static_params, gamma_static_additive, gamma_static_multiplicative, verify_iqc_condition, IqcGrid, IqcTrigger,
    IqcVerdict, StaticDesign, StaticTrigger, TriggerSpec, DEFAULT_MU, DEFAULT_NU, DEFAULT_SAFETY,
};
use crate::{Error, Result};

/// Tolerance below `‖Δ‖∞` tolerated for a user-supplied `η`.
pub const ETA_TOL: f64 = 1e-6;
/// Fraction of `γ_opt⁻² − η²` used when rescaling `G₁`.
pub const G1_SCALE_FRACTION: f64 = 0.95;
/// Default interpolation weight for the filtered design level.
pub const DEFAULT_STEP5_WEIGHT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Alg1,
    Alg2,
    Alg3,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySpec {
    Explicit(StateSpace),
    /// Only `‖Δ‖∞ ≤ η` is known; simulations run without `Δ`.
    NormBound(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerConfig {
    pub safety: f64,
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub chi0: f64,
    /// Overrides the scalar·I choice for the static trigger weights.
    pub omega1: Option<Mat>,
    pub omega2: Option<Mat>,
    pub g1: Option<StateSpace>,
    pub g2: Option<StateSpace>,
    /// Rescale a `G₁` that violates its norm bound instead of failing.
    pub g1_autoscale: bool,
    pub step5_weight: f64,
    /// Seed for generated filters and random filter initial states.
    pub seed: u64,
    /// Draw the filter initial states from `[-1, 1]` instead of zero.
    pub random_filter_states: bool,
    pub x0_filter1: Option<Vector>,
    pub x0_filter2: Option<Vector>,
    pub reset_g2_inv_on_event: bool,
    /// Order of generated filters.
    pub filter_order: usize,
    pub iqc_grid: IqcGrid,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            safety: DEFAULT_SAFETY,
            mu: DEFAULT_MU,
            nu: DEFAULT_NU,
            alpha: 2.5,
            beta: 1.0,
            chi0: 1.0,
            omega1: None,
            omega2: None,
            g1: None,
            g2: None,
            g1_autoscale: true,
            step5_weight: DEFAULT_STEP5_WEIGHT,
            seed: 0,
            random_filter_states: false,
            x0_filter1: None,
            x0_filter2: None,
            reset_g2_inv_on_event: false,
            filter_order: 2,
            iqc_grid: IqcGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub uncertainty: UncertaintySpec,
    /// Overrides `‖Δ‖∞` as the uncertainty bound.
    pub eta: Option<f64>,
    pub algorithm: Algorithm,
    pub trigger: TriggerConfig,
    pub x0_plant: Option<Vector>,
    pub x0_uncertainty: Option<Vector>,
    pub horizon: f64,
    pub sim: SimOptions,
    pub simulate: bool,
    pub gamma_rel_tol: f64,
}

impl DesignConfig {
    pub fn new(a: Mat, b: Mat, c: Mat, uncertainty: UncertaintySpec, algorithm: Algorithm) -> Self {
        Self {
            a,
            b,
            c,
            uncertainty,
            eta: None,
            algorithm,
            trigger: TriggerConfig::default(),
            x0_plant: None,
            x0_uncertainty: None,
            horizon: 6.0,
            sim: SimOptions::default(),
            simulate: true,
            gamma_rel_tol: DEFAULT_GAMMA_REL_TOL,
        }
    }

    pub fn kind(&self) -> Kind {
        match self.algorithm {
            Algorithm::Alg2 => Kind::Multiplicative,
            Algorithm::Alg1 | Algorithm::Alg3 => Kind::Additive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    /// `‖G₁‖∞` as supplied or generated.
    pub sigma1_given: f64,
    /// `‖G₁‖∞` after any rescaling.
    pub sigma1: f64,
    pub scaled: bool,
    pub g2_norm: f64,
    /// Upper end `1/√(σ₁² + η²)` of the admissible level interval.
    pub gamma_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub delta_norm: Option<f64>,
    pub gamma_opt: f64,
    pub gate_passed: bool,
    pub gate: String,
    pub trigger: Option<TriggerSpec>,
    /// Operator gain of the trigger (`γ` or `γ̂`); static designs only.
    pub trigger_gain: Option<f64>,
    /// Level handed to the synthesis.
    pub synthesis_level: Option<f64>,
    pub controller: Option<StateSpace>,
    /// `‖M‖∞` recomputed from the explicit closed-loop realization.
    pub gamma_verified: Option<f64>,
    pub closed_loop_hurwitz: Option<bool>,
    /// `1 − (loop gain)·‖M‖∞`; positive when the small-gain test passes.
    pub small_gain_margin: Option<f64>,
    /// `gamma_verified < synthesis_level` and the closed loop is Hurwitz.
    pub design_verified: bool,
    pub filters: Option<FilterReport>,
    pub iqc: Option<IqcVerdict>,
    pub simulation: Option<Simulation>,
    pub budget: Option<BudgetReport>,
    pub decay: Option<DecayMetrics>,
    pub warnings: Vec<String>,
}

impl DesignReport {
    fn gate_failed(algorithm: Algorithm, eta: f64, delta_norm: Option<f64>, gamma_opt: f64, gate: String, warnings: Vec<String>) -> Self {
        Self {
            algorithm,
            eta,
            delta_norm,
            gamma_opt,
            gate_passed: false,
            gate,
            trigger: None,
            trigger_gain: None,
            synthesis_level: None,
            controller: None,
            gamma_verified: None,
            closed_loop_hurwitz: None,
            small_gain_margin: None,
            design_verified: false,
            filters: None,
            iqc: None,
            simulation: None,
            budget: None,
            decay: None,
            warnings,
        }
    }
}

fn resolve_eta(cfg: &DesignConfig, warnings: &mut Vec<String>) -> Result<(f64, Option<f64>)> {
    let delta_norm = match &cfg.uncertainty {
        UncertaintySpec::Explicit(d) => Some(hinf_norm(d, DEFAULT_NORM_REL_TOL)?.norm),
        UncertaintySpec::NormBound(_) => None,
    };
    let eta = match (cfg.eta, &cfg.uncertainty, delta_norm) {
        (Some(e), _, Some(n)) => {
            if e < n - ETA_TOL {
                warnings.push(format!("eta = {e} is below the uncertainty norm {n}"));
            }
            e
        }
        (Some(e), _, None) => e,
        (None, _, Some(n)) => n,
        (None, UncertaintySpec::NormBound(e), None) => *e,
        (None, UncertaintySpec::Explicit(_), None) => unreachable!(),
    };
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("eta must be finite and nonnegative, got {eta}")));
    }
    Ok((eta, delta_norm))
}

fn build_plant(cfg: &DesignConfig) -> Result<AugmentedPlant> {
    match cfg.kind() {
        Kind::Additive => build_p_add(&cfg.a, &cfg.b, &cfg.c),
        Kind::Multiplicative => build_p_mul(&cfg.a, &cfg.b, &cfg.c),
    }
}

fn static_trigger(cfg: &DesignConfig, gamma_opt: f64, eta: f64, p: usize, m: usize) -> Result<StaticTrigger> {
    let t = &cfg.trigger;
    match (&t.omega1, &t.omega2) {
        (Some(o1), Some(o2)) => StaticTrigger::new(o1.clone(), o2.clone(), t.mu, t.nu),
        (None, None) => design_static_params(
            gamma_opt,
            eta,
            &StaticDesign { safety: t.safety, mu: t.mu, nu: t.nu },
            cfg.kind(),
            p,
            m,
        ),
        _ => Err(Error::InvalidParameter("Omega1 and Omega2 must be given together".into())),
    }
}

fn synthesize(aug: &AugmentedPlant, level: f64) -> Result<StateSpace> {
    let syn = hinf_syn(&aug.p, aug.nmeas(), aug.nctrl(), level)?;
    match (syn.feasible, syn.controller) {
        (true, Some(k)) => Ok(k),
        _ => Err(Error::InfeasibleDesign(format!("synthesis at level {level} failed: {:?}", syn.diagnostic))),
    }
}

struct Verified {
    norm: Option<f64>,
    hurwitz: bool,
    m: StateSpace,
}

fn verify_closed_loop(cfg: &DesignConfig, k: &StateSpace) -> Result<Verified> {
    let m = match cfg.kind() {
        Kind::Additive => closed_loop_m(&cfg.a, &cfg.b, &cfg.c, k)?.m,
        Kind::Multiplicative => closed_loop_mhat(&cfg.a, &cfg.b, &cfg.c, k)?.m,
    };
    let hurwitz = statespace::is_hurwitz(&m)?;
    let norm = if hurwitz { Some(hinf_norm(&m, DEFAULT_NORM_REL_TOL)?.norm) } else { None };
    Ok(Verified { norm, hurwitz, m })
}

fn run_simulation(
    cfg: &DesignConfig,
    k: &StateSpace,
    trigger: &TriggerSpec,
    x0_filters: (Option<Vector>, Option<Vector>),
    warnings: &mut Vec<String>,
) -> Result<(Simulation, BudgetReport, DecayMetrics)> {
    let plant = StateSpace::new(cfg.a.clone(), cfg.b.clone(), cfg.c.clone(), Mat::zeros(cfg.c.nrows(), cfg.b.ncols()))?;
    let uncertainty = match (&cfg.uncertainty, cfg.kind()) {
        (UncertaintySpec::Explicit(d), Kind::Additive) => Uncertainty::Additive(d.clone()),
        (UncertaintySpec::Explicit(d), Kind::Multiplicative) => Uncertainty::Multiplicative(d.clone()),
        (UncertaintySpec::NormBound(_), _) => {
            warnings.push(String::from("no uncertainty realization given; simulating the nominal plant"));
            Uncertainty::None
        }
    };
    let nxi = match &uncertainty {
        Uncertainty::None => 0,
        Uncertainty::Additive(d) | Uncertainty::Multiplicative(d) => d.states(),
    };
    let setup = ClosedLoopSetup {
        x0_plant: cfg.x0_plant.clone().unwrap_or_else(|| Vector::from_element(plant.states(), 1.0)),
        x0_uncertainty: cfg.x0_uncertainty.clone().unwrap_or_else(|| Vector::zeros(nxi)),
        x0_controller: Vector::zeros(k.states()),
        plant,
        uncertainty,
        controller: k.clone(),
        trigger: trigger.clone(),
        x0_filter1: x0_filters.0,
        x0_filter2: x0_filters.1,
    };
    let sim = simulate(&setup, cfg.horizon, &cfg.sim)?;
    warnings.extend(sim.trace.warnings.iter().cloned());
    let budget = l2_budget_report(&sim.trace, trigger);
    let decay = decay_metrics(&sim.trace);
    Ok((sim, budget, decay))
}

/// Runs the procedure selected by `cfg.algorithm`.
pub fn run_design(cfg: &DesignConfig) -> Result<DesignReport> {
    match cfg.algorithm {
        Algorithm::Alg1 | Algorithm::Alg2 => run_static(cfg),
        Algorithm::Alg3 => run_algorithm3(cfg),
    }
}

pub fn run_algorithm1(cfg: &DesignConfig) -> Result<DesignReport> {
    check_algorithm(cfg, Algorithm::Alg1)?;
    run_static(cfg)
}

pub fn run_algorithm2(cfg: &DesignConfig) -> Result<DesignReport> {
    check_algorithm(cfg, Algorithm::Alg2)?;
    run_static(cfg)
}

fn check_algorithm(cfg: &DesignConfig, want: Algorithm) -> Result<()> {
    if cfg.algorithm == want {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("config selects {:?}, not {:?}", cfg.algorithm, want)))
    }
}

fn run_static(cfg: &DesignConfig) -> Result<DesignReport> {
    let mut warnings = Vec::new();
    let (eta, delta_norm) = resolve_eta(cfg, &mut warnings)?;
    let aug = build_plant(cfg)?;
    let (p, m) = (cfg.c.nrows(), cfg.b.ncols());
    let gamma_opt = hinf_opt_gamma(&aug.p, aug.nmeas(), aug.nctrl(), cfg.gamma_rel_tol)?.gamma_opt;

    let (gate_passed, gate) = match cfg.kind() {
        Kind::Additive => (gamma_opt * eta < 1.0, format!("gamma_opt * eta = {} < 1", gamma_opt * eta)),
        Kind::Multiplicative => {
            let inv = if gamma_opt > 0.0 { 1.0 / gamma_opt } else { f64::INFINITY };
            (inv >= eta, format!("1/gamma_opt = {inv} >= eta = {eta}"))
        }
    };
    if !gate_passed {
        return Ok(DesignReport::gate_failed(cfg.algorithm, eta, delta_norm, gamma_opt, gate, warnings));
    }

    let trig = static_trigger(cfg, gamma_opt, eta, p, m)?;
    let gain = match cfg.kind() {
        Kind::Additive => gamma_static_additive(trig.omega1(), trig.omega2(), eta)?,
        Kind::Multiplicative => gamma_static_multiplicative(trig.omega1(), trig.omega2(), eta)?,
    };
    let level = 1.0 / gain;
    let k = synthesize(&aug, level)?;
    let ver = verify_closed_loop(cfg, &k)?;
    let design_verified = ver.hurwitz && ver.norm.is_some_and(|n| n < level);
    let small_gain_margin = ver.norm.map(|n| 1.0 - gain * n);
    let trigger = TriggerSpec::Static(trig);

    let (simulation, budget, decay) = if cfg.simulate && design_verified {
        let (s, b, d) = run_simulation(cfg, &k, &trigger, (None, None), &mut warnings)?;
        (Some(s), Some(b), Some(d))
    } else {
        (None, None, None)
    };
    Ok(DesignReport {
        algorithm: cfg.algorithm,
        eta,
        delta_norm,
        gamma_opt,
        gate_passed,
        gate,
        trigger: Some(trigger),
        trigger_gain: Some(gain),
        synthesis_level: Some(level),
        controller: Some(k),
        gamma_verified: ver.norm,
        closed_loop_hurwitz: Some(ver.hurwitz),
        small_gain_margin,
        design_verified,
        filters: None,
        iqc: None,
        simulation,
        budget,
        decay,
        warnings,
    })
}

/// Random stable square realization with an invertible feedthrough,
/// rescaled to `‖G‖∞ = target`.
pub fn random_filter(rng: &mut ChaCha8Rng, width: usize, order: usize, target: f64) -> Result<StateSpace> {
    let mut r = |rows: usize, cols: usize| Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let s = r(order, order);
    let a = (&s - s.transpose()) * 2.0 - eye(order) * 2.0 - Mat::from_diagonal(&r(order, 1).column(0).map(|x| x.abs() * 3.0));
    let b = r(order, width);
    let c = r(width, order);
    let d = eye(width) + r(width, width) * 0.2;
    let g = StateSpace::new(a, b, c, d)?;
    let norm = hinf_norm(&g, DEFAULT_NORM_REL_TOL)?.norm;
    g.scale_output(target / norm)
}

pub fn run_algorithm3(cfg: &DesignConfig) -> Result<DesignReport> {
    check_algorithm(cfg, Algorithm::Alg3)?;
    let mut warnings = Vec::new();
    let (eta, delta_norm) = resolve_eta(cfg, &mut warnings)?;
    let aug = build_p_add(&cfg.a, &cfg.b, &cfg.c)?;
    let w = cfg.c.nrows() + cfg.b.ncols();
    let gamma_opt = hinf_opt_gamma(&aug.p, aug.nmeas(), aug.nctrl(), cfg.gamma_rel_tol)?.gamma_opt;

    let gate_passed = gamma_opt * eta < 1.0;
    let gate = format!("gamma_opt * eta = {} < 1", gamma_opt * eta);
    if !gate_passed {
        return Ok(DesignReport::gate_failed(cfg.algorithm, eta, delta_norm, gamma_opt, gate, warnings));
    }
    let t = &cfg.trigger;
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let room = if gamma_opt > 0.0 { gamma_opt.powi(-2) - eta * eta } else { f64::INFINITY };
    if !room.is_finite() {
        return Err(Error::InfeasibleDesign("gamma_opt = 0 leaves the filter bound undefined".into()));
    }
    let s1 = (G1_SCALE_FRACTION * room).sqrt();

    // G₁ with ‖G₁‖∞² < γ_opt⁻² − η²
    let g1_given = match &t.g1 {
        Some(g) => g.clone(),
        None => random_filter(&mut rng, w, t.filter_order, s1)?,
    };
    let sigma1_given = hinf_norm(&g1_given, DEFAULT_NORM_REL_TOL)?.norm;
    let (g1, scaled) = if sigma1_given * sigma1_given < room {
        (g1_given, false)
    } else if t.g1_autoscale {
        warnings.push(format!("G1 norm {sigma1_given} violates sigma1^2 < {room}; rescaled to {s1}"));
        (g1_given.scale_output(s1 / sigma1_given)?, true)
    } else {
        return Err(Error::InfeasibleDesign(format!(
            "G1 bound violated: ||G1||^2 = {} must be below gamma_opt^-2 - eta^2 = {room}",
            sigma1_given * sigma1_given
        )));
    };
    let sigma1 = if scaled { hinf_norm(&g1, DEFAULT_NORM_REL_TOL)?.norm } else { sigma1_given };

    // G₂ with ‖G₂‖∞ ≤ 1 and invertible D₂
    let g2 = match &t.g2 {
        Some(g) => g.clone(),
        None => random_filter(&mut rng, w, t.filter_order, 0.9)?,
    };
    let g2_norm = hinf_norm(&g2, DEFAULT_NORM_REL_TOL)?.norm;
    if g2_norm > 1.0 {
        return Err(Error::InfeasibleDesign(format!("G2 bound violated: ||G2|| = {g2_norm} exceeds 1")));
    }
    invert_realization(&g2).map_err(|e| Error::InfeasibleDesign(format!("G2 is not invertible: {e}")))?;

    let mut iqc = IqcTrigger::new(g1.clone(), g2.clone(), t.alpha, t.beta, t.chi0)?;
    iqc.reset_g2_inv_on_event = t.reset_g2_inv_on_event;
    let x0_filters = if t.random_filter_states {
        let n1 = iqc.g1().states();
        let n2 = iqc.g2_inv().states();
        let x1 = Vector::from_fn(n1, |_, _| rng.random_range(-1.0..1.0));
        let x2 = Vector::from_fn(n2, |_, _| rng.random_range(-1.0..1.0));
        (Some(x1), Some(x2))
    } else {
        (t.x0_filter1.clone(), t.x0_filter2.clone())
    };

    let gamma_max = 1.0 / (sigma1 * sigma1 + eta * eta).sqrt();
    if !(t.step5_weight > 0.0 && t.step5_weight < 1.0) {
        return Err(Error::InvalidParameter(format!("step5_weight must lie in (0, 1), got {}", t.step5_weight)));
    }
    let level = t.step5_weight * (gamma_max - gamma_opt) + gamma_opt;
    let k = synthesize(&aug, level)?;
    let ver = verify_closed_loop(cfg, &k)?;
    let design_verified = ver.hurwitz && ver.norm.is_some_and(|n| n < level);
    let small_gain_margin = ver.norm.map(|n| 1.0 - n / gamma_max);
    let verdict = if ver.hurwitz { Some(verify_iqc_condition(&ver.m, &g1, &g2, eta, &t.iqc_grid)?) } else { None };
    let trigger = TriggerSpec::Iqc(iqc);

    let (simulation, budget, decay) = if cfg.simulate && design_verified {
        let (s, b, d) = run_simulation(cfg, &k, &trigger, x0_filters, &mut warnings)?;
        (Some(s), Some(b), Some(d))
    } else {
        (None, None, None)
    };
    Ok(DesignReport {
        algorithm: cfg.algorithm,
        eta,
        delta_norm,
        gamma_opt,
        gate_passed,
        gate,
        trigger: Some(trigger),
        trigger_gain: None,
        synthesis_level: Some(level),
        controller: Some(k),
        gamma_verified: ver.norm,
        closed_loop_hurwitz: Some(ver.hurwitz),
        small_gain_margin,
        design_verified,
        filters: Some(FilterReport { sigma1_given, sigma1, scaled, g2_norm, gamma_max }),
        iqc: verdict,
        simulation,
        budget,
        decay,
        warnings,
    })
}

/// One compared quantity. `tolerance` is absolute.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub computed: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn abs(name: &str, computed: f64, reference: f64, tolerance: f64) -> Self {
        Self { name: name.into(), computed, reference, tolerance, pass: (computed - reference).abs() <= tolerance }
    }
    pub fn rel(name: &str, computed: f64, reference: f64, rel: f64) -> Self {
        Self::abs(name, computed, reference, rel * reference.abs())
    }
}

/// The published two-state design example: plant, uncertainty, filters
/// and the reported design quantities.
pub mod reference {
    use super::*;

    pub const ETA: f64 = 0.1112;
    pub const GAMMA_OPT: f64 = 3.0683;
    pub const OMEGA1: f64 = 0.1041;
    pub const OMEGA2: f64 = 0.0920;
    pub const GAMMA: f64 = 0.3230;
    pub const SIGMA1: f64 = 0.2986;
    pub const G2_NORM: f64 = 0.9;
    pub const GAMMA_IQC: f64 = 3.1244;
    pub const SAFETY: f64 = 0.98;
    pub const X0_PLANT: [f64; 2] = [1.0, -1.0];
    pub const CHI0: f64 = 1.0;

    pub fn plant() -> (Mat, Mat, Mat) {
        (
            Mat::from_row_slice(2, 2, &[-12.5, 5.9, -7.1, 13.8]),
            Mat::from_row_slice(2, 1, &[1.0, 2.0]),
            Mat::from_row_slice(1, 2, &[-4.0, 5.5]),
        )
    }

    pub fn delta() -> StateSpace {
        StateSpace::from_rows(2, 1, 1, &[-15.4, 10.7, -15.7, -1.41], &[-1.24, -1.28], &[1.165, -2.07], &[0.0])
            .expect("valid realization")
    }

    pub fn g1() -> StateSpace {
        StateSpace::from_rows(
            2,
            2,
            2,
            &[-1.9, 6.7, -4.3, -10.4],
            &[0.1019, -0.2209, 0.7561, -0.4842],
            &[0.3, -4.1, 0.58, 0.39],
            &[0.0025, 0.0, 0.0671, 0.1529],
        )
        .expect("valid realization")
    }

    pub fn g2() -> StateSpace {
        StateSpace::from_rows(
            2,
            2,
            2,
            &[-19.0, 16.7, -43.0, 0.4],
            &[0.2, -2.6, 1.9, -0.57],
            &[0.064, 0.8743, 0.1237, -0.0832],
            &[0.7677, 0.0, 0.0671, -0.5118],
        )
        .expect("valid realization")
    }

    fn base(algorithm: Algorithm) -> DesignConfig {
        let (a, b, c) = plant();
        let mut cfg = DesignConfig::new(a, b, c, UncertaintySpec::Explicit(delta()), algorithm);
        cfg.x0_plant = Some(Vector::from_column_slice(&X0_PLANT));
        cfg.horizon = 6.0;
        cfg.trigger.safety = SAFETY;
        cfg
    }

    /// Static-trigger design with additive uncertainty.
    pub fn alg1_config() -> DesignConfig {
        base(Algorithm::Alg1)
    }

    /// Filtered dynamic-trigger design with the example filters.
    pub fn alg3_config() -> DesignConfig {
        let mut cfg = base(Algorithm::Alg3);
        cfg.trigger.g1 = Some(g1());
        cfg.trigger.g2 = Some(g2());
        cfg.trigger.alpha = 2.5;
        cfg.trigger.beta = 1.0;
        cfg.trigger.chi0 = CHI0;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reproduction {
    pub rows: Vec<CheckRow>,
    pub alg1: DesignReport,
    pub alg3: DesignReport,
}

impl Reproduction {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Step 5 level from `γ_opt`, `σ₁`, `η`.
pub fn step5_level(gamma_opt: f64, sigma1: f64, eta: f64, weight: f64) -> f64 {
    weight * (1.0 / (sigma1 * sigma1 + eta * eta).sqrt() - gamma_opt) + gamma_opt
}

/// Runs both example designs with `alg1`/`alg3` (usually
/// [`reference::alg1_config`], [`reference::alg3_config`], possibly with
/// simulation settings changed) and compares against the reported values.
pub fn reproduce_reference(alg1: &DesignConfig, alg3: &DesignConfig) -> Result<Reproduction> {
    use reference as r;
    let a1 = run_algorithm1(alg1)?;
    let a3 = run_algorithm3(alg3)?;
    let mut rows = Vec::new();
    rows.push(CheckRow::abs("eta", a1.delta_norm.unwrap_or(a1.eta), r::ETA, 1e-3));
    rows.push(CheckRow::rel("gamma_opt", a1.gamma_opt, r::GAMMA_OPT, 0.01));
    let (o1, o2) = match &a1.trigger {
        Some(TriggerSpec::Static(t)) => (t.omega1()[(0, 0)], t.omega2()[(0, 0)]),
        _ => (f64::NAN, f64::NAN),
    };
    rows.push(CheckRow::abs("omega1", o1, r::OMEGA1, 5e-4));
    rows.push(CheckRow::abs("omega2", o2, r::OMEGA2, 5e-4));
    rows.push(CheckRow::abs("gamma", a1.trigger_gain.unwrap_or(f64::NAN), r::GAMMA, 5e-4));
    let f = a3.filters.as_ref();
    rows.push(CheckRow::abs("sigma1", f.map_or(f64::NAN, |f| f.sigma1_given), r::SIGMA1, 1e-2));
    rows.push(CheckRow::abs("g2_norm", f.map_or(f64::NAN, |f| f.g2_norm), r::G2_NORM, 1e-2));
    rows.push(CheckRow::rel("gamma_iqc", a3.synthesis_level.unwrap_or(f64::NAN), r::GAMMA_IQC, 0.01));

    // closed forms evaluated at the reported optimum
    let eta = a1.eta;
    let t = design_static_params(
        r::GAMMA_OPT,
        eta,
        &StaticDesign { safety: alg1.trigger.safety, mu: alg1.trigger.mu, nu: alg1.trigger.nu },
        Kind::Additive,
        1,
        1,
    )?;
    rows.push(CheckRow::abs("omega1_at_reported_gamma_opt", t.omega1()[(0, 0)], r::OMEGA1, 5e-4));
    rows.push(CheckRow::abs("omega2_at_reported_gamma_opt", t.omega2()[(0, 0)], r::OMEGA2, 5e-4));
    let g = gamma_static_additive(t.omega1(), t.omega2(), eta)?;
    rows.push(CheckRow::abs("gamma_at_reported_gamma_opt", g, r::GAMMA, 5e-4));
    let sigma1 = f.map_or(f64::NAN, |f| f.sigma1_given);
    let lvl = step5_level(r::GAMMA_OPT, sigma1, eta, alg3.trigger.step5_weight);
    rows.push(CheckRow::rel("gamma_iqc_at_reported_gamma_opt", lvl, r::GAMMA_IQC, 0.01));
    Ok(Reproduction { rows, alg1: a1, alg3: a3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mut cfg: DesignConfig) -> DesignConfig {
        cfg.sim.dt = 1e-4;
        cfg.horizon = 1.0;
        cfg
    }

    #[test]
    fn gate_fails_for_large_eta() {
        let mut cfg = reference::alg1_config();
        cfg.eta = Some(0.5);
        cfg.simulate = false;
        let r = run_algorithm1(&cfg).unwrap();
        assert!(!r.gate_passed);
        assert!(r.controller.is_none());
        assert_eq!(r.gate_passed, r.gamma_opt * r.eta < 1.0);
    }

    #[test]
    fn zero_uncertainty_uses_full_budget() {
        let (a, b, c) = reference::plant();
        let mut cfg = DesignConfig::new(a, b, c, UncertaintySpec::NormBound(0.0), Algorithm::Alg1);
        cfg.simulate = false;
        let r = run_algorithm1(&cfg).unwrap();
        assert!(r.gate_passed && r.design_verified);
        let Some(TriggerSpec::Static(t)) = &r.trigger else { panic!() };
        let expect = DEFAULT_SAFETY / (r.gamma_opt * r.gamma_opt);
        assert!((t.omega1()[(0, 0)] - expect).abs() < 1e-15);
        assert!((t.omega2()[(0, 0)] - expect).abs() < 1e-15);
        assert!(r.gamma_verified.unwrap() < r.synthesis_level.unwrap());
    }

    #[test]
    fn additive_end_to_end() {
        let r = run_algorithm1(&quick(reference::alg1_config())).unwrap();
        assert!(r.gate_passed && r.design_verified, "{r:?}");
        assert!(r.small_gain_margin.unwrap() > 0.0);
        assert!(r.budget.unwrap().satisfied);
    }

    #[test]
    fn multiplicative_end_to_end() {
        // Δ of norm 0.1 in the multiplicative position
        let d = reference::delta().scale_output(0.1 / hinf_norm(&reference::delta(), 1e-9).unwrap().norm).unwrap();
        let (a, b, c) = reference::plant();
        let mut cfg = DesignConfig::new(a, b, c, UncertaintySpec::Explicit(d), Algorithm::Alg2);
        cfg.x0_plant = Some(Vector::from_column_slice(&reference::X0_PLANT));
        let r = run_algorithm2(&quick(cfg)).unwrap();
        assert!(r.gate_passed && r.design_verified);
        let kappa_inv = 1.0 / r.gamma_opt;
        assert!((r.trigger_gain.unwrap() - kappa_inv * DEFAULT_SAFETY.sqrt()).abs() < 1e-12);
        assert!(r.budget.unwrap().satisfied);
    }

    #[test]
    fn multiplicative_gate() {
        let (a, b, c) = reference::plant();
        let mut cfg = DesignConfig::new(a, b, c, UncertaintySpec::NormBound(0.5), Algorithm::Alg2);
        cfg.simulate = false;
        let r = run_algorithm2(&cfg).unwrap();
        assert!(!r.gate_passed);
    }

    #[test]
    fn g1_autoscale_hits_target_norm() {
        let mut cfg = reference::alg3_config();
        cfg.simulate = false;
        let r = run_algorithm3(&cfg).unwrap();
        let f = r.filters.unwrap();
        let s1 = (G1_SCALE_FRACTION * (r.gamma_opt.powi(-2) - r.eta * r.eta)).sqrt();
        assert!(f.scaled);
        assert!((f.sigma1 - s1).abs() < 1e-6, "{} vs {s1}", f.sigma1);
        assert!(r.iqc.unwrap().passed());
        assert!(r.design_verified);

        cfg.trigger.g1_autoscale = false;
        match run_algorithm3(&cfg) {
            Err(Error::InfeasibleDesign(msg)) => assert!(msg.contains("G1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_filters() {
        // G₁ = 0, G₂ = I
        let mut cfg = reference::alg3_config();
        cfg.trigger.g1 = Some(StateSpace::gain(Mat::zeros(2, 2)).unwrap());
        cfg.trigger.g2 = Some(StateSpace::gain(eye(2)).unwrap());
        let r = run_algorithm3(&quick(cfg)).unwrap();
        assert!(r.design_verified);
        assert!(r.iqc.unwrap().passed());
        assert!(r.budget.unwrap().satisfied);
    }

    #[test]
    fn generated_filters_respect_bounds() {
        let (a, b, c) = reference::plant();
        let mut cfg = DesignConfig::new(a, b, c, UncertaintySpec::Explicit(reference::delta()), Algorithm::Alg3);
        cfg.trigger.seed = 7;
        cfg.simulate = false;
        let r = run_algorithm3(&cfg).unwrap();
        let f = r.filters.unwrap();
        assert!(!f.scaled);
        assert!(f.sigma1 * f.sigma1 < r.gamma_opt.powi(-2) - r.eta * r.eta);
        assert!(f.g2_norm <= 1.0);
    }
}
