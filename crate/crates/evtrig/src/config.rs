//! TOML configuration.
//!
//! Matrices are lists of rows (`a = [[-12.5, 5.9], [-7.1, 13.8]]`), vectors
//! are flat lists. A realization section takes `a`, `b`, `c`, `d`; `d` may
//! be omitted when `a` is nonempty, and `a`, `b`, `c` may be omitted for a
//! static gain.

use std::path::Path;

use evtrig_core::augment::Kind;
use evtrig_core::linalg::{Mat, Vector};
use evtrig_core::pipeline::{Algorithm, DesignConfig, TriggerConfig, UncertaintySpec};
use evtrig_core::sim::{SimOptions, Uncertainty, ZenoPolicy};
use evtrig_core::statespace::StateSpace;
use evtrig_core::trigger::{DynamicTrigger, IqcGrid, IqcTrigger, StaticTrigger, TriggerSpec};
use serde::{Deserialize, Serialize};

use crate::RunError;

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub algorithm: Option<AlgorithmName>,
    pub plant: PlantSection,
    pub uncertainty: Option<UncertaintySection>,
    pub controller: Option<Realization>,
    #[serde(default)]
    pub trigger: TriggerSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmName {
    Alg1,
    Alg2,
    Alg3,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyKind {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySection {
    pub kind: Option<UncertaintyKind>,
    pub a: Option<Matrix>,
    pub b: Option<Matrix>,
    pub c: Option<Matrix>,
    pub d: Option<Matrix>,
    /// Norm bound; required when no realization is given.
    pub eta: Option<f64>,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Realization {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Matrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerKind {
    Static,
    Dynamic,
    Iqc,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSection {
    /// Only read by `simulate` and `verify`; designs pick their own.
    pub kind: Option<TriggerKind>,
    pub safety: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub chi0: Option<f64>,
    pub omega1: Option<Matrix>,
    pub omega2: Option<Matrix>,
    pub g1: Option<Realization>,
    pub g2: Option<Realization>,
    pub g1_autoscale: Option<bool>,
    pub step5_weight: Option<f64>,
    pub seed: Option<u64>,
    pub random_filter_states: Option<bool>,
    pub x0_filter1: Option<Vec<f64>>,
    pub x0_filter2: Option<Vec<f64>>,
    pub reset_g2_inv_on_event: Option<bool>,
    pub filter_order: Option<usize>,
    pub iqc_grid_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZenoName {
    Stop,
    Refractory,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub enabled: Option<bool>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub dt_record: Option<f64>,
    pub zeno_policy: Option<ZenoName>,
    pub x0_controller: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub gamma_rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub safety: Vec<f64>,
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub nu: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    pub threads: Option<usize>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
}

pub fn load(path: &Path) -> Result<FileConfig, RunError> {
    let text = std::fs::read_to_string(path)?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<FileConfig, RunError> {
    toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
}

fn cfg_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

pub fn matrix(rows: &Matrix, name: &str) -> Result<Mat, RunError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(cfg_err(format!("{name}: rows have different lengths")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(cfg_err(format!("{name}: entries must be finite")));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Matrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn vector(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

impl Realization {
    pub fn build(&self, name: &str) -> Result<StateSpace, RunError> {
        let get = |m: &Option<Matrix>, part: &str| m.as_ref().map(|m| matrix(m, &format!("{name}.{part}"))).transpose();
        let (a, b, c, d) = (get(&self.a, "a")?, get(&self.b, "b")?, get(&self.c, "c")?, get(&self.d, "d")?);
        let ss = match (a, b, c, d) {
            (Some(a), Some(b), Some(c), d) if a.nrows() > 0 => {
                let d = d.unwrap_or_else(|| Mat::zeros(c.nrows(), b.ncols()));
                StateSpace::new(a, b, c, d)
            }
            (_, _, _, Some(d)) => StateSpace::gain(d),
            _ => return Err(cfg_err(format!("{name}: give a, b, c (and optionally d), or d alone"))),
        };
        ss.map_err(|e| cfg_err(format!("{name}: {e}")))
    }

    pub fn from_state_space(ss: &StateSpace) -> Self {
        let some = |m: &Mat| Some(to_rows(m));
        if ss.states() == 0 {
            Realization { d: some(ss.d()), ..Default::default() }
        } else {
            Realization { a: some(ss.a()), b: some(ss.b()), c: some(ss.c()), d: some(ss.d()) }
        }
    }
}

impl FileConfig {
    pub fn plant_matrices(&self) -> Result<(Mat, Mat, Mat), RunError> {
        Ok((matrix(&self.plant.a, "plant.a")?, matrix(&self.plant.b, "plant.b")?, matrix(&self.plant.c, "plant.c")?))
    }

    pub fn algorithm(&self) -> Result<Algorithm, RunError> {
        match self.algorithm {
            Some(AlgorithmName::Alg1) => Ok(Algorithm::Alg1),
            Some(AlgorithmName::Alg2) => Ok(Algorithm::Alg2),
            Some(AlgorithmName::Alg3) => Ok(Algorithm::Alg3),
            None => Err(cfg_err("`algorithm` must be one of alg1, alg2, alg3")),
        }
    }

    /// Uncertainty kind: from `uncertainty.kind`, else implied by the
    /// algorithm, else additive.
    pub fn kind(&self) -> Result<Kind, RunError> {
        let implied = self.algorithm.map(|a| if a == AlgorithmName::Alg2 { Kind::Multiplicative } else { Kind::Additive });
        let given = self.uncertainty.as_ref().and_then(|u| u.kind).map(|k| match k {
            UncertaintyKind::Additive => Kind::Additive,
            UncertaintyKind::Multiplicative => Kind::Multiplicative,
        });
        match (given, implied) {
            (Some(g), Some(i)) if g != i => Err(cfg_err("uncertainty.kind contradicts the algorithm")),
            (Some(g), _) => Ok(g),
            (None, Some(i)) => Ok(i),
            (None, None) => Ok(Kind::Additive),
        }
    }

    /// `Some` when a realization is given.
    pub fn uncertainty_model(&self) -> Result<Option<StateSpace>, RunError> {
        let Some(u) = &self.uncertainty else { return Ok(None) };
        if u.a.is_none() && u.b.is_none() && u.c.is_none() && u.d.is_none() {
            return Ok(None);
        }
        let r = Realization { a: u.a.clone(), b: u.b.clone(), c: u.c.clone(), d: u.d.clone() };
        r.build("uncertainty").map(Some)
    }

    pub fn sim_options(&self, ov: &Overrides) -> SimOptions {
        let s = &self.simulation;
        let mut o = SimOptions::default();
        if let Some(dt) = ov.dt.or(s.dt) {
            o.dt = dt;
        }
        if let Some(r) = s.dt_record {
            o.dt_record = r;
        }
        o.zeno_policy = match s.zeno_policy {
            Some(ZenoName::Refractory) => ZenoPolicy::Refractory,
            _ => ZenoPolicy::Stop,
        };
        o
    }

    pub fn horizon(&self, ov: &Overrides) -> f64 {
        ov.horizon.or(self.simulation.horizon).unwrap_or(6.0)
    }

    pub fn design_config(&self, ov: &Overrides) -> Result<DesignConfig, RunError> {
        let (a, b, c) = self.plant_matrices()?;
        let algorithm = self.algorithm()?;
        self.kind()?;
        let eta = self.uncertainty.as_ref().and_then(|u| u.eta);
        let uncertainty = match self.uncertainty_model()? {
            Some(d) => UncertaintySpec::Explicit(d),
            None => UncertaintySpec::NormBound(eta.ok_or_else(|| cfg_err("uncertainty needs a realization or eta"))?),
        };
        let mut cfg = DesignConfig::new(a, b, c, uncertainty, algorithm);
        cfg.eta = eta;
        cfg.trigger = self.trigger_config(ov)?;
        cfg.x0_plant = self.plant.x0.as_deref().map(vector);
        cfg.x0_uncertainty = self.uncertainty.as_ref().and_then(|u| u.x0.as_deref()).map(vector);
        cfg.horizon = self.horizon(ov);
        cfg.sim = self.sim_options(ov);
        cfg.simulate = self.simulation.enabled.unwrap_or(true);
        if let Some(t) = self.synthesis.gamma_rel_tol {
            cfg.gamma_rel_tol = t;
        }
        Ok(cfg)
    }

    fn trigger_config(&self, ov: &Overrides) -> Result<TriggerConfig, RunError> {
        let t = &self.trigger;
        let mut out = TriggerConfig::default();
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = t.$f { out.$f = v; } )* };
        }
        take!(safety, mu, nu, alpha, beta, chi0, g1_autoscale, step5_weight, random_filter_states, reset_g2_inv_on_event, filter_order);
        if let Some(s) = ov.seed.or(t.seed) {
            out.seed = s;
        }
        out.omega1 = t.omega1.as_ref().map(|m| matrix(m, "trigger.omega1")).transpose()?;
        out.omega2 = t.omega2.as_ref().map(|m| matrix(m, "trigger.omega2")).transpose()?;
        out.g1 = t.g1.as_ref().map(|r| r.build("trigger.g1")).transpose()?;
        out.g2 = t.g2.as_ref().map(|r| r.build("trigger.g2")).transpose()?;
        out.x0_filter1 = t.x0_filter1.as_deref().map(vector);
        out.x0_filter2 = t.x0_filter2.as_deref().map(vector);
        if let Some(n) = t.iqc_grid_points {
            out.iqc_grid = IqcGrid { points: n, ..IqcGrid::default() };
        }
        Ok(out)
    }

    /// Explicit trigger for `simulate` and `verify`.
    pub fn explicit_trigger(&self) -> Result<TriggerSpec, RunError> {
        let t = &self.trigger;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| cfg_err(format!("trigger.{name} is required")));
        let weights = || -> Result<(Mat, Mat), RunError> {
            let o1 = t.omega1.as_ref().ok_or_else(|| cfg_err("trigger.omega1 is required"))?;
            let o2 = t.omega2.as_ref().ok_or_else(|| cfg_err("trigger.omega2 is required"))?;
            Ok((matrix(o1, "trigger.omega1")?, matrix(o2, "trigger.omega2")?))
        };
        let spec = match t.kind.ok_or_else(|| cfg_err("trigger.kind is required (static, dynamic, iqc)"))? {
            TriggerKind::Static => {
                let (o1, o2) = weights()?;
                TriggerSpec::Static(StaticTrigger::new(o1, o2, t.mu.unwrap_or(0.1), t.nu.unwrap_or(5.0))?)
            }
            TriggerKind::Dynamic => {
                let (o1, o2) = weights()?;
                TriggerSpec::Dynamic(DynamicTrigger::new(o1, o2, need(t.alpha, "alpha")?, need(t.beta, "beta")?, need(t.chi0, "chi0")?)?)
            }
            TriggerKind::Iqc => {
                let g1 = t.g1.as_ref().ok_or_else(|| cfg_err("trigger.g1 is required"))?.build("trigger.g1")?;
                let g2 = t.g2.as_ref().ok_or_else(|| cfg_err("trigger.g2 is required"))?.build("trigger.g2")?;
                let mut q = IqcTrigger::new(g1, g2, need(t.alpha, "alpha")?, need(t.beta, "beta")?, need(t.chi0, "chi0")?)?;
                q.reset_g2_inv_on_event = t.reset_g2_inv_on_event.unwrap_or(false);
                TriggerSpec::Iqc(q)
            }
        };
        Ok(spec)
    }

    pub fn controller(&self) -> Result<StateSpace, RunError> {
        self.controller.as_ref().ok_or_else(|| cfg_err("a [controller] section is required"))?.build("controller")
    }

    pub fn sim_uncertainty(&self) -> Result<Uncertainty, RunError> {
        Ok(match (self.uncertainty_model()?, self.kind()?) {
            (None, _) => Uncertainty::None,
            (Some(d), Kind::Additive) => Uncertainty::Additive(d),
            (Some(d), Kind::Multiplicative) => Uncertainty::Multiplicative(d),
        })
    }
}

/// The design example as a config file.
pub fn reference_file_config(algorithm: AlgorithmName) -> FileConfig {
    use evtrig_core::pipeline::reference as r;
    let (a, b, c) = r::plant();
    let d = r::delta();
    let mut cfg = FileConfig {
        algorithm: Some(algorithm),
        plant: PlantSection { a: to_rows(&a), b: to_rows(&b), c: to_rows(&c), x0: Some(r::X0_PLANT.to_vec()) },
        uncertainty: Some(UncertaintySection {
            kind: Some(UncertaintyKind::Additive),
            a: Some(to_rows(d.a())),
            b: Some(to_rows(d.b())),
            c: Some(to_rows(d.c())),
            d: Some(to_rows(d.d())),
            eta: None,
            x0: None,
        }),
        ..Default::default()
    };
    cfg.trigger.safety = Some(r::SAFETY);
    cfg.simulation.horizon = Some(6.0);
    if algorithm == AlgorithmName::Alg3 {
        cfg.trigger.g1 = Some(Realization::from_state_space(&r::g1()));
        cfg.trigger.g2 = Some(Realization::from_state_space(&r::g2()));
        cfg.trigger.alpha = Some(2.5);
        cfg.trigger.beta = Some(1.0);
        cfg.trigger.chi0 = Some(r::CHI0);
    }
    cfg
}
