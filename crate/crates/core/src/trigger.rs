//! Triggering functions (static, dynamic, filtered IQC), the operator-gain
//! formulas that link trigger parameters to an H∞ level, and the
//! frequency-gridded IQC stability check.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::augment::Kind;
use crate::hinf::{hinf_norm, DEFAULT_NORM_REL_TOL};
use crate::linalg::{self, blkdiag, eye, CMat, Mat, Vector};
use crate::statespace::{self, invert_realization, StateSpace};
use crate::{Error, Result};

pub const DEFAULT_MU: f64 = 0.1;
pub const DEFAULT_NU: f64 = 5.0;
pub const DEFAULT_SAFETY: f64 = 0.98;
/// Strictness margin for the IQC matrix inequality.
pub const IQC_MARGIN: f64 = 1e-8;

fn check_pd(m: &Mat, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidParameter(format!("{name} must be square and nonempty")));
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidParameter(format!("{name} must be symmetric")));
    }
    if linalg::cholesky_lower(m).is_none() {
        return Err(Error::InvalidParameter(format!("{name} must be positive definite")));
    }
    Ok(())
}

fn check_positive(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
    }
}

/// `f = εᵀε − vᵀ diag(Ω₁, Ω₂) v − μ e^{−νt}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticTrigger {
    omega1: Mat,
    omega2: Mat,
    omega: Mat,
    pub mu: f64,
    pub nu: f64,
}

impl StaticTrigger {
    pub fn new(omega1: Mat, omega2: Mat, mu: f64, nu: f64) -> Result<Self> {
        check_pd(&omega1, "Omega1")?;
        check_pd(&omega2, "Omega2")?;
        check_positive(mu, "mu")?;
        check_positive(nu, "nu")?;
        let omega = blkdiag(&[&omega1, &omega2]);
        Ok(Self { omega1, omega2, omega, mu, nu })
    }
    pub fn omega1(&self) -> &Mat {
        &self.omega1
    }
    pub fn omega2(&self) -> &Mat {
        &self.omega2
    }
    /// `diag(Ω₁, Ω₂)`.
    pub fn omega(&self) -> &Mat {
        &self.omega
    }
}

/// `f = εᵀε − vᵀΩv − χ`, `χ̇ = −βχ − α(εᵀε − vᵀΩv)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicTrigger {
    omega1: Mat,
    omega2: Mat,
    omega: Mat,
    pub alpha: f64,
    pub beta: f64,
    pub chi0: f64,
}

impl DynamicTrigger {
    pub fn new(omega1: Mat, omega2: Mat, alpha: f64, beta: f64, chi0: f64) -> Result<Self> {
        check_pd(&omega1, "Omega1")?;
        check_pd(&omega2, "Omega2")?;
        check_positive(alpha, "alpha")?;
        check_positive(beta, "beta")?;
        check_positive(chi0, "chi0")?;
        let omega = blkdiag(&[&omega1, &omega2]);
        Ok(Self { omega1, omega2, omega, alpha, beta, chi0 })
    }
    pub fn omega1(&self) -> &Mat {
        &self.omega1
    }
    pub fn omega2(&self) -> &Mat {
        &self.omega2
    }
    pub fn omega(&self) -> &Mat {
        &self.omega
    }
}

/// Dynamic trigger on filtered signals `v̄ = G₁ v`, `ε̄ = G₂⁻¹ ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct IqcTrigger {
    g1: StateSpace,
    g2: StateSpace,
    g2_inv: StateSpace,
    pub alpha: f64,
    pub beta: f64,
    pub chi0: f64,
    /// Zero the `G₂⁻¹` state at every event. Off by default: the filter
    /// states are dynamics of the mechanism and persist across events.
    pub reset_g2_inv_on_event: bool,
}

impl IqcTrigger {
    pub fn new(g1: StateSpace, g2: StateSpace, alpha: f64, beta: f64, chi0: f64) -> Result<Self> {
        check_positive(alpha, "alpha")?;
        check_positive(beta, "beta")?;
        check_positive(chi0, "chi0")?;
        let w = g1.inputs();
        if g1.outputs() != w || g2.inputs() != w || g2.outputs() != w {
            return Err(Error::Dimension(format!(
                "G1 is {}x{}, G2 is {}x{}; both must be square of the same size",
                g1.outputs(),
                g1.inputs(),
                g2.outputs(),
                g2.inputs()
            )));
        }
        if !statespace::is_hurwitz(&g1)? {
            return Err(Error::InvalidParameter("G1 must be stable".into()));
        }
        if !statespace::is_hurwitz(&g2)? {
            return Err(Error::InvalidParameter("G2 must be stable".into()));
        }
        let g2_inv = invert_realization(&g2)?;
        Ok(Self { g1, g2, g2_inv, alpha, beta, chi0, reset_g2_inv_on_event: false })
    }
    pub fn g1(&self) -> &StateSpace {
        &self.g1
    }
    pub fn g2(&self) -> &StateSpace {
        &self.g2
    }
    pub fn g2_inv(&self) -> &StateSpace {
        &self.g2_inv
    }
    /// Width of `v` and `ε` (`p + m`).
    pub fn width(&self) -> usize {
        self.g1.inputs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TriggerSpec {
    Static(StaticTrigger),
    Dynamic(DynamicTrigger),
    Iqc(IqcTrigger),
}

impl TriggerSpec {
    /// Internal state at `t = 0` with the given filter initial states
    /// (zeros when `None`).
    pub fn initial_state(&self, x1: Option<Vector>, x2: Option<Vector>) -> Result<TriggerState> {
        match self {
            TriggerSpec::Static(_) => Ok(TriggerState { chi: 0.0, x1: Vector::zeros(0), x2: Vector::zeros(0) }),
            TriggerSpec::Dynamic(d) => Ok(TriggerState { chi: d.chi0, x1: Vector::zeros(0), x2: Vector::zeros(0) }),
            TriggerSpec::Iqc(q) => {
                let x1 = x1.unwrap_or_else(|| Vector::zeros(q.g1.states()));
                let x2 = x2.unwrap_or_else(|| Vector::zeros(q.g2_inv.states()));
                if x1.len() != q.g1.states() || x2.len() != q.g2_inv.states() {
                    return Err(Error::Dimension("filter initial state has the wrong length".into()));
                }
                Ok(TriggerState { chi: q.chi0, x1, x2 })
            }
        }
    }

    /// Defect term of the integral budget: `μ/ν` or `χ(0)/(α+β)`.
    pub fn defect(&self) -> f64 {
        match self {
            TriggerSpec::Static(s) => s.mu / s.nu,
            TriggerSpec::Dynamic(d) => d.chi0 / (d.alpha + d.beta),
            TriggerSpec::Iqc(q) => q.chi0 / (q.alpha + q.beta),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            TriggerSpec::Static(s) => s.omega.nrows(),
            TriggerSpec::Dynamic(d) => d.omega.nrows(),
            TriggerSpec::Iqc(q) => q.width(),
        }
    }
}

/// Mutable part of a trigger: `χ` and the `G₁`, `G₂⁻¹` filter states.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerState {
    pub chi: f64,
    pub x1: Vector,
    pub x2: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicEval {
    pub f: f64,
    pub chi_dot: f64,
}

fn quad(m: &Mat, v: &Vector) -> f64 {
    v.dot(&(m * v))
}

pub fn eval_static(trig: &StaticTrigger, eps: &Vector, v: &Vector, t: f64) -> f64 {
    eps.norm_squared() - quad(&trig.omega, v) - trig.mu * (-trig.nu * t).exp()
}

pub fn eval_dynamic(trig: &DynamicTrigger, eps: &Vector, v: &Vector, chi: f64) -> DynamicEval {
    let q = eps.norm_squared() - quad(&trig.omega, v);
    DynamicEval { f: q - chi, chi_dot: -trig.beta * chi - trig.alpha * q }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqcFilterOutput {
    pub dx1: Vector,
    pub dx2: Vector,
    pub vbar: Vector,
    pub epsbar: Vector,
}

pub fn iqc_filter_derivatives(trig: &IqcTrigger, state: &TriggerState, v: &Vector, eps: &Vector) -> IqcFilterOutput {
    let (g1, g2i) = (&trig.g1, &trig.g2_inv);
    IqcFilterOutput {
        dx1: g1.a() * &state.x1 + g1.b() * v,
        dx2: g2i.a() * &state.x2 + g2i.b() * eps,
        vbar: g1.c() * &state.x1 + g1.d() * v,
        epsbar: g2i.c() * &state.x2 + g2i.d() * eps,
    }
}

pub fn eval_iqc(trig: &IqcTrigger, epsbar: &Vector, vbar: &Vector, chi: f64) -> DynamicEval {
    let q = epsbar.norm_squared() - vbar.norm_squared();
    DynamicEval { f: q - chi, chi_dot: -trig.beta * chi - trig.alpha * q }
}

fn spectral_radius_sym(m: &Mat) -> f64 {
    linalg::sym_eigenvalues(m).iter().fold(0.0, |acc, e| acc.max(e.abs()))
}

/// `γ = √max{ρ(Ω₁), ρ(Ω₂ + η²I)}`.
pub fn gamma_static_additive(omega1: &Mat, omega2: &Mat, eta: f64) -> Result<f64> {
    check_pd(omega1, "Omega1")?;
    check_pd(omega2, "Omega2")?;
    let shifted = omega2 + eye(omega2.nrows()) * (eta * eta);
    Ok(spectral_radius_sym(omega1).max(spectral_radius_sym(&shifted)).sqrt())
}

/// `γ̂ = √max{η², ρ(Ω₁), ρ(Ω₂)}`.
pub fn gamma_static_multiplicative(omega1: &Mat, omega2: &Mat, eta: f64) -> Result<f64> {
    check_pd(omega1, "Omega1")?;
    check_pd(omega2, "Omega2")?;
    Ok((eta * eta).max(spectral_radius_sym(omega1)).max(spectral_radius_sym(omega2)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticDesign {
    /// Fraction of the admissible bound used for `Ω₁`, `Ω₂`, in `(0, 1)`.
    pub safety: f64,
    pub mu: f64,
    pub nu: f64,
}

impl Default for StaticDesign {
    fn default() -> Self {
        Self { safety: DEFAULT_SAFETY, mu: DEFAULT_MU, nu: DEFAULT_NU }
    }
}

/// Scalar-times-identity `Ω₁` (`p×p`) and `Ω₂` (`m×m`) at `safety` times
/// their admissible bounds.
///
/// Additive: `Ω₁ < γ_opt⁻²I`, `Ω₂ < (γ_opt⁻² − η²)I`, gate `γ_opt η < 1`.
/// Multiplicative: `Ω₁, Ω₂ < γ_opt⁻²I`, gate `γ_opt⁻¹ ≥ η`.
pub fn design_static_params(
    gamma_opt: f64,
    eta: f64,
    design: &StaticDesign,
    kind: Kind,
    p: usize,
    m: usize,
) -> Result<StaticTrigger> {
    if !(design.safety > 0.0 && design.safety < 1.0) {
        return Err(Error::InvalidParameter(format!("safety must lie in (0, 1), got {}", design.safety)));
    }
    if !(gamma_opt >= 0.0) || !(eta >= 0.0) {
        return Err(Error::InvalidParameter("gamma_opt and eta must be nonnegative".into()));
    }
    let inv2 = if gamma_opt > 0.0 { gamma_opt.powi(-2) } else { f64::INFINITY };
    let (w1, w2) = match kind {
        Kind::Additive => {
            if !(gamma_opt * eta < 1.0) {
                return Err(Error::InfeasibleDesign(format!(
                    "additive gate gamma_opt * eta < 1 fails: {gamma_opt} * {eta} = {}",
                    gamma_opt * eta
                )));
            }
            (design.safety * inv2, design.safety * (inv2 - eta * eta))
        }
        Kind::Multiplicative => {
            if !(inv2.sqrt() >= eta) {
                return Err(Error::InfeasibleDesign(format!(
                    "multiplicative gate 1/gamma_opt >= eta fails: 1/{gamma_opt} < {eta}"
                )));
            }
            (design.safety * inv2, design.safety * inv2)
        }
    };
    if !w1.is_finite() || !w2.is_finite() {
        return Err(Error::InfeasibleDesign("gamma_opt = 0 leaves the trigger weights unbounded".into()));
    }
    StaticTrigger::new(eye(p) * w1, eye(m) * w2, design.mu, design.nu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqcGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for IqcGrid {
    fn default() -> Self {
        Self { omega_min: 1e-3, omega_max: 1e4, points: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqcVerdict {
    /// Largest eigenvalue of the left-hand side of the matrix inequality
    /// over all tested frequencies; the inequality needs it below `1`.
    pub worst: f64,
    pub worst_omega: f64,
    pub grid_ok: bool,
    /// `√(‖G₁‖∞² + η²)·‖M‖∞ < 1` and `‖G₂‖∞ ≤ 1`.
    pub scalar_ok: bool,
    pub g1_norm: f64,
    pub g2_norm: f64,
    pub m_norm: f64,
}

impl IqcVerdict {
    pub fn passed(&self) -> bool {
        self.grid_ok
    }
}

/// Checks `N* M* (G₁*G₁ + η²I) M N < I`, `N = diag(G₂, I)`, on a log grid
/// plus the peak frequencies of `M`, `G₁`, `G₂` and a local refinement
/// around the worst grid point. `M` maps `(ε, d)` to `v`.
pub fn verify_iqc_condition(m: &StateSpace, g1: &StateSpace, g2: &StateSpace, eta: f64, grid: &IqcGrid) -> Result<IqcVerdict> {
    if !statespace::is_hurwitz(m)? {
        return Err(Error::NotHurwitz);
    }
    let w = g1.inputs();
    if m.outputs() != w || g2.inputs() != w || m.inputs() < w {
        return Err(Error::Dimension(format!(
            "M is {}x{}, filters are {}x{}",
            m.outputs(),
            m.inputs(),
            w,
            w
        )));
    }
    let nd = m.inputs() - w;
    let m_norm = hinf_norm(m, DEFAULT_NORM_REL_TOL)?;
    let g1_norm = hinf_norm(g1, DEFAULT_NORM_REL_TOL)?;
    let g2_norm = hinf_norm(g2, DEFAULT_NORM_REL_TOL)?;

    let lhs = |omega: f64| -> Result<f64> {
        let mg = statespace::freq_response(m, omega)?.g;
        let g1g = statespace::freq_response(g1, omega)?.g;
        let g2g = statespace::freq_response(g2, omega)?.g;
        let mut n = CMat::zeros(w + nd, w + nd);
        n.view_mut((0, 0), (w, w)).copy_from(&g2g);
        for i in 0..nd {
            n[(w + i, w + i)] = linalg::C64::new(1.0, 0.0);
        }
        let mn = mg * n;
        let top = &g1g * &mn;
        let mut stacked = CMat::zeros(2 * w, w + nd);
        stacked.view_mut((0, 0), (w, w + nd)).copy_from(&top);
        stacked.view_mut((w, 0), (w, w + nd)).copy_from(&(mn * linalg::C64::new(eta, 0.0)));
        let s = linalg::sigma_max_c(&stacked);
        Ok(s * s)
    };

    let mut freqs: Vec<f64> = linalg::logspace(grid.omega_min, grid.omega_max, grid.points);
    freqs.push(0.0);
    for peak in [m_norm.peak_omega, g1_norm.peak_omega, g2_norm.peak_omega] {
        if peak.is_finite() {
            freqs.push(peak);
        }
    }
    let (mut worst, mut worst_omega) = (f64::NEG_INFINITY, 0.0);
    for &f in &freqs {
        let v = lhs(f)?;
        if v > worst {
            worst = v;
            worst_omega = f;
        }
    }
    if worst_omega > 0.0 {
        for f in linalg::logspace(worst_omega * 0.98, worst_omega * 1.02, 101) {
            let v = lhs(f)?;
            if v > worst {
                worst = v;
                worst_omega = f;
            }
        }
    }
    // the high-frequency limit through the feedthrough terms
    let far = lhs(grid.omega_max * 1e3)?;
    if far > worst {
        worst = far;
        worst_omega = grid.omega_max * 1e3;
    }

    let scalar_ok = (g1_norm.norm.powi(2) + eta * eta).sqrt() * m_norm.norm < 1.0 && g2_norm.norm <= 1.0;
    Ok(IqcVerdict {
        worst,
        worst_omega,
        grid_ok: worst < 1.0 - IQC_MARGIN,
        scalar_ok,
        g1_norm: g1_norm.norm,
        g2_norm: g2_norm.norm,
        m_norm: m_norm.norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn s(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }
    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(alloc::vec![a, b])
    }

    fn paper_static() -> StaticTrigger {
        StaticTrigger::new(s(0.1041), s(0.0920), 0.1, 5.0).unwrap()
    }

    #[test]
    fn static_examples() {
        let t = paper_static();
        assert_eq!(eval_static(&t, &v2(0.0, 0.0), &v2(0.0, 0.0), 0.0), -0.1);
        let f = eval_static(&t, &v2(0.1, 0.0), &v2(1.0, 0.0), 0.0);
        assert_relative_eq!(f, 0.01 - 0.1041 - 0.1, epsilon = 1e-15);
        assert_relative_eq!(f, -0.1941, epsilon = 1e-12);
        // boundary: εᵀε = vᵀΩv + μe^{−νt}
        let (vv, t0) = (v2(1.0, 2.0), 0.3);
        let rhs = 0.1041 + 4.0 * 0.0920 + 0.1 * (-5.0f64 * t0).exp();
        let f = eval_static(&t, &v2(rhs.sqrt(), 0.0), &vv, t0);
        assert!(f.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StaticTrigger::new(s(-1.0), s(1.0), 0.1, 5.0).is_err());
        assert!(StaticTrigger::new(s(1.0), s(1.0), 0.0, 5.0).is_err());
        assert!(DynamicTrigger::new(s(1.0), s(1.0), 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn dynamic_examples() {
        let d = DynamicTrigger::new(s(0.1), s(0.2), 2.5, 1.0, 0.7).unwrap();
        let e = eval_dynamic(&d, &v2(0.0, 0.0), &v2(0.0, 0.0), 0.7);
        assert_eq!(e.f, -0.7);
        assert_eq!(e.chi_dot, -0.7);
        // on the surface f = 0
        let vv = v2(1.0, 1.0);
        let chi = 0.4;
        let eps_sq = chi + 0.1 + 0.2;
        let e = eval_dynamic(&d, &v2(eps_sq.sqrt(), 0.0), &vv, chi);
        assert!(e.f.abs() < 1e-15);
        assert_relative_eq!(e.chi_dot, -(2.5 + 1.0) * chi, epsilon = 1e-14);
    }

    /// RK4 on `χ̇ = −βχ − α q(t)` with `q = s(t) χ`, `s ∈ [−1, 1]`, so that
    /// `f = q − χ ≤ 0` throughout; compares against `χ₀ e^{−(α+β)t}`.
    #[test]
    fn dynamic_chi_comparison_bound() {
        let d = DynamicTrigger::new(s(0.1), s(0.2), 2.5, 1.0, 1.3).unwrap();
        for k in 0..5 {
            let shape = |t: f64| (3.0 * t + k as f64).sin();
            let rhs = |t: f64, chi: f64| -d.beta * chi - d.alpha * shape(t) * chi;
            let (mut t, mut chi, h) = (0.0, d.chi0, 1e-4);
            while t < 5.0 {
                let k1 = rhs(t, chi);
                let k2 = rhs(t + h / 2.0, chi + h / 2.0 * k1);
                let k3 = rhs(t + h / 2.0, chi + h / 2.0 * k2);
                let k4 = rhs(t + h, chi + h * k3);
                chi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                t += h;
                assert!(chi >= d.chi0 * (-(d.alpha + d.beta) * t).exp() * (1.0 - 1e-9));
                assert!(chi > 0.0);
            }
        }
    }

    #[test]
    fn iqc_with_static_filters_reduces_to_dynamic() {
        let sigma = 0.3;
        let g1 = StateSpace::gain(eye(2) * sigma).unwrap();
        let g2 = StateSpace::gain(eye(2)).unwrap();
        let q = IqcTrigger::new(g1, g2, 2.5, 1.0, 0.5).unwrap();
        let d = DynamicTrigger::new(s(sigma * sigma), s(sigma * sigma), 2.5, 1.0, 0.5).unwrap();
        let st = TriggerSpec::Iqc(q.clone()).initial_state(None, None).unwrap();
        let (vv, ee) = (v2(0.7, -1.2), v2(0.05, 0.2));
        let out = iqc_filter_derivatives(&q, &st, &vv, &ee);
        assert_eq!(out.epsbar, ee);
        let a = eval_iqc(&q, &out.epsbar, &out.vbar, 0.5);
        let b = eval_dynamic(&d, &ee, &vv, 0.5);
        assert_relative_eq!(a.f, b.f, epsilon = 1e-15);
        assert_relative_eq!(a.chi_dot, b.chi_dot, epsilon = 1e-15);
    }

    #[test]
    fn iqc_zero_signals() {
        let g1 = StateSpace::from_rows(1, 2, 2, &[-1.0], &[1.0, 0.0], &[1.0, 1.0], &[0.1, 0.0, 0.0, 0.1]).unwrap();
        let g2 = StateSpace::from_rows(1, 2, 2, &[-2.0], &[1.0, 1.0], &[0.1, 0.0], &[0.5, 0.0, 0.0, 0.5]).unwrap();
        let q = IqcTrigger::new(g1, g2, 1.0, 1.0, 0.2).unwrap();
        let st = TriggerSpec::Iqc(q.clone()).initial_state(None, None).unwrap();
        let out = iqc_filter_derivatives(&q, &st, &v2(0.0, 0.0), &v2(0.0, 0.0));
        assert!(out.dx1.iter().chain(out.dx2.iter()).chain(out.vbar.iter()).chain(out.epsbar.iter()).all(|&x| x == 0.0));
        let e = eval_iqc(&q, &out.epsbar, &out.vbar, 0.2);
        assert_eq!(e.f, -0.2);
        // on the surface ‖ε̄‖² − ‖v̄‖² = χ
        let e = eval_iqc(&q, &v2(1.0, 0.0), &v2(0.5, 0.0), 0.75);
        assert_eq!(e.f, 0.0);
        assert_relative_eq!(e.chi_dot, -2.0 * 0.75, epsilon = 1e-15);
    }

    #[test]
    fn gain_formula_examples() {
        assert_relative_eq!(gamma_static_additive(&eye(2), &eye(1), 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(gamma_static_additive(&(eye(2) * 4.0), &eye(2), 1.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(gamma_static_multiplicative(&(eye(1) * 0.5), &(eye(1) * 0.5), 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            gamma_static_multiplicative(&(eye(1) * 0.25), &(eye(1) * 0.16), 0.3).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn design_zero_uncertainty() {
        let t = design_static_params(2.0, 0.0, &StaticDesign::default(), Kind::Additive, 1, 2).unwrap();
        assert_relative_eq!(t.omega1()[(0, 0)], 0.98 * 0.25);
        assert_eq!(t.omega2(), &(eye(2) * (0.98 * 0.25)));
        assert!(matches!(
            design_static_params(2.0, 0.5, &StaticDesign::default(), Kind::Additive, 1, 1),
            Err(Error::InfeasibleDesign(_))
        ));
        assert!(matches!(
            design_static_params(2.0, 0.6, &StaticDesign::default(), Kind::Multiplicative, 1, 1),
            Err(Error::InfeasibleDesign(_))
        ));
    }

    #[test]
    fn iqc_condition_trivial_and_violated() {
        let g1 = StateSpace::gain(Mat::zeros(2, 2)).unwrap();
        let g2 = StateSpace::gain(eye(2)).unwrap();
        let zero = StateSpace::from_rows(1, 3, 2, &[-1.0], &[0.0; 3], &[0.0; 2], &[0.0; 6]).unwrap();
        let v = verify_iqc_condition(&zero, &g1, &g2, 0.0, &IqcGrid::default()).unwrap();
        assert!(v.passed());
        assert_eq!(v.worst, 0.0);

        // ‖M‖∞ = 20 > 1/η with η = 0.1
        let big = StateSpace::from_rows(1, 3, 2, &[-1.0], &[1.0, 0.0, 1.0], &[20.0, 0.0], &[0.0; 6]).unwrap();
        let v = verify_iqc_condition(&big, &g1, &g2, 0.1, &IqcGrid::default()).unwrap();
        assert!(!v.passed());
        assert!(!v.scalar_ok);
    }

    #[test]
    fn gain_and_design_reference_values() {
        let g = gamma_static_additive(&s(0.1041), &s(0.0920), 0.1112).unwrap();
        assert!((g - 0.3230).abs() < 5e-4, "{g}");
        let t = design_static_params(3.0683, 0.1112, &StaticDesign::default(), Kind::Additive, 1, 1).unwrap();
        assert!((t.omega1()[(0, 0)] - 0.1041).abs() < 5e-5);
        assert!((t.omega2()[(0, 0)] - 0.0920).abs() < 5e-5);
        assert_eq!((t.mu, t.nu), (0.1, 5.0));
    }

    fn example_g1() -> StateSpace {
        StateSpace::from_rows(
            2,
            2,
            2,
            &[-1.9, 6.7, -4.3, -10.4],
            &[0.1019, -0.2209, 0.7561, -0.4842],
            &[0.3, -4.1, 0.58, 0.39],
            &[0.0025, 0.0, 0.0671, 0.1529],
        )
        .unwrap()
    }

    #[test]
    fn g1_steady_state_matches_dc_gain() {
        let g1 = example_g1();
        let g2 = StateSpace::gain(eye(2) * 0.9).unwrap();
        let q = IqcTrigger::new(g1.clone(), g2, 2.5, 1.0, 1.0).unwrap();
        let vv = v2(1.0, 1.0);
        // oracle: C₁(−A₁)⁻¹B₁ + D₁ applied to v
        let x_ss = (-g1.a()).lu().solve(&(g1.b() * &vv)).unwrap();
        let expect = g1.c() * &x_ss + g1.d() * &vv;
        // integrate the filter to steady state with explicit Euler
        let mut st = TriggerSpec::Iqc(q.clone()).initial_state(None, None).unwrap();
        let zero = v2(0.0, 0.0);
        for _ in 0..200_000 {
            let out = iqc_filter_derivatives(&q, &st, &vv, &zero);
            st.x1 += out.dx1 * 1e-4;
        }
        let out = iqc_filter_derivatives(&q, &st, &vv, &zero);
        assert!((out.vbar - expect).amax() < 1e-6);
    }

    proptest! {
        #[test]
        fn additive_gain_matches_eigen_oracle(a in 0.01f64..4.0, b in 0.01f64..4.0, c in 0.0f64..1.0, eta in 0.0f64..2.0) {
            // Ω₂ = [[a, c·√(ab)], [c·√(ab), b]] is PD for c < 1
            let off = 0.9 * c * (a * b).sqrt();
            let o2 = Mat::from_row_slice(2, 2, &[a, off, off, b]);
            let o1 = eye(1) * (a + b);
            let tr = a + b;
            let det = a * b - off * off;
            let lmax = tr / 2.0 + (tr * tr / 4.0 - det).max(0.0).sqrt();
            let expect = (a + b).max(lmax + eta * eta).sqrt();
            let got = gamma_static_additive(&o1, &o2, eta).unwrap();
            prop_assert!((got - expect).abs() <= 1e-12 * expect.max(1.0));
            let expect_m = (eta * eta).max(a + b).max(lmax).sqrt();
            let got_m = gamma_static_multiplicative(&o1, &o2, eta).unwrap();
            prop_assert!((got_m - expect_m).abs() <= 1e-12 * expect_m.max(1.0));
        }

        #[test]
        fn safety_below_one_keeps_synthesis_target_above_optimum(g in 0.5f64..10.0, frac in 0.0f64..0.99, safety in 0.5f64..0.9999) {
            let eta = frac / g;
            let t = design_static_params(g, eta, &StaticDesign { safety, ..StaticDesign::default() }, Kind::Additive, 1, 1).unwrap();
            let gamma = gamma_static_additive(t.omega1(), t.omega2(), eta).unwrap();
            prop_assert!(1.0 / gamma > g);
            let tm = design_static_params(g, eta, &StaticDesign { safety, ..StaticDesign::default() }, Kind::Multiplicative, 1, 1).unwrap();
            let gh = gamma_static_multiplicative(tm.omega1(), tm.omega2(), eta).unwrap();
            prop_assert!(gh <= (1.0 / g).max(eta) + 1e-15);
        }
    }
}
