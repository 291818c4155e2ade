//! Two-Riccati central controller for the general output-feedback H∞
//! problem (nonzero `D11`, `D22 = 0`).
//!
//! The plant is first brought to the normalized form `D12 = [0; I]`,
//! `D21 = [0 I]` by orthogonal rotations of `w` and `z` and invertible
//! rescalings of `u` and `y`. The rotations leave the `w → z` norm unchanged
//! and the rescalings are folded back into the controller.

use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;

use super::care::{solve_care, RiccatiSolution};
use super::norm::{hinf_norm, DEFAULT_NORM_REL_TOL};
use crate::linalg::{self, blkdiag, eye, hstack, mul, mul3, vstack, zeros, Mat};
use crate::statespace::{self, lft_lower, Partitioned, StateSpace};
use crate::{Error, Result};

pub const DEFAULT_GAMMA_REL_TOL: f64 = 1e-4;
/// Levels below this are reported as zero by [`hinf_opt_gamma`].
pub const GAMMA_FLOOR: f64 = 1e-10;
const GAMMA_CAP: f64 = 1e8;
const RANK_COND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynOptions {
    pub norm_rel_tol: f64,
    /// Relative tolerance on the smallest eigenvalue of `X∞`, `Y∞`.
    pub psd_tol: f64,
}

impl Default for SynOptions {
    fn default() -> Self {
        Self { norm_rel_tol: DEFAULT_NORM_REL_TOL, psd_tol: 1e-8 }
    }
}

/// The first condition that failed at the requested level.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    /// `γ` does not exceed the feedthrough bound imposed by `D11`.
    D11Bound { bound: f64 },
    XRiccati(Error),
    XNotPsd { min_eig: f64 },
    YRiccati(Error),
    YNotPsd { min_eig: f64 },
    /// `ρ(X∞ Y∞) ≥ γ²`.
    Coupling { rho: f64 },
    /// The Riccati conditions held but the recomputed closed loop did not
    /// meet the level (numerical breakdown near the optimum).
    Verification { hurwitz: bool, norm: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub x_inf: Mat,
    pub y_inf: Mat,
    /// `ρ(X∞ Y∞)`.
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub controller: Option<StateSpace>,
    pub gamma_requested: f64,
    /// `‖F_l(P, K)‖∞` from an independent norm computation.
    pub gamma_verified: Option<f64>,
    pub feasible: bool,
    pub diagnostic: Option<Infeasibility>,
    pub certificate: Option<Certificate>,
}

impl SynthesisResult {
    fn infeasible(gamma: f64, why: Infeasibility) -> Self {
        Self {
            controller: None,
            gamma_requested: gamma,
            gamma_verified: None,
            feasible: false,
            diagnostic: Some(why),
            certificate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalLevel {
    pub gamma_opt: f64,
    /// Set when every level down to [`GAMMA_FLOOR`] was feasible.
    pub below_floor: bool,
    pub synthesis: SynthesisResult,
}

/// Plant in normalized coordinates together with the maps back.
struct Normalized {
    a: Mat,
    b1: Mat,
    b2: Mat,
    c1: Mat,
    c2: Mat,
    d11: Mat,
    /// `u = ru ũ`
    ru: Mat,
    /// `ỹ = ry y`
    ry: Mat,
    m1: usize,
    m2: usize,
    p1: usize,
    p2: usize,
}

fn check_structure(p: &StateSpace, nmeas: usize, nctrl: usize) -> Result<Partitioned> {
    if nmeas > p.outputs() || nctrl > p.inputs() || nmeas == 0 || nctrl == 0 {
        return Err(Error::Dimension(format!(
            "partition ({nmeas} meas, {nctrl} ctrl) invalid for plant {}x{}",
            p.outputs(),
            p.inputs()
        )));
    }
    let parts = Partitioned::split(p, nmeas, nctrl);
    if !linalg::is_zero(&parts.d22) {
        return Err(Error::Structural("D22 must be zero".into()));
    }
    let channel = StateSpace::new(parts.a.clone(), parts.b2.clone(), parts.c2.clone(), parts.d22.clone())?;
    let pbh = statespace::check_stabilizable_detectable(&channel)?;
    if !pbh.stabilizable {
        return Err(Error::Structural("(A, B2) is not stabilizable".into()));
    }
    if !pbh.detectable {
        return Err(Error::Structural("(A, C2) is not detectable".into()));
    }
    Ok(parts)
}

fn is_zero_coupling(parts: &Partitioned) -> bool {
    linalg::is_zero(&parts.c1) && linalg::is_zero(&parts.d11) && linalg::is_zero(&parts.d12)
}

/// Moves the last `k` columns of `q` to the front.
fn rotate_cols(q: &Mat, k: usize) -> Mat {
    let n = q.ncols();
    Mat::from_fn(q.nrows(), n, |i, j| q[(i, (j + n - k) % n)])
}

fn normalize(parts: &Partitioned) -> Result<Normalized> {
    let (p1, m2) = parts.d12.shape();
    let (p2, m1) = parts.d21.shape();
    if p1 < m2 {
        return Err(Error::Structural(format!("D12 is {p1}x{m2}; needs at least as many rows as columns")));
    }
    if m1 < p2 {
        return Err(Error::Structural(format!("D21 is {p2}x{m1}; needs at least as many columns as rows")));
    }

    let (q, r) = linalg::full_qr(&parts.d12);
    let r1 = r.view((0, 0), (m2, m2)).into_owned();
    if !(linalg::cond(&r1) <= RANK_COND) {
        return Err(Error::Structural("D12 does not have full column rank".into()));
    }
    let theta_z = rotate_cols(&q, p1 - m2);
    let ru = linalg::inverse(&r1).ok_or_else(|| Error::Structural("D12 does not have full column rank".into()))?;

    let (q2, r2) = linalg::full_qr(&parts.d21.transpose());
    let r2 = r2.view((0, 0), (p2, p2)).into_owned();
    if !(linalg::cond(&r2) <= RANK_COND) {
        return Err(Error::Structural("D21 does not have full row rank".into()));
    }
    let theta_w = rotate_cols(&q2, m1 - p2);
    let ry = linalg::inverse(&r2.transpose())
        .ok_or_else(|| Error::Structural("D21 does not have full row rank".into()))?;

    Ok(Normalized {
        a: parts.a.clone(),
        b1: mul(&parts.b1, &theta_w),
        b2: mul(&parts.b2, &ru),
        c1: mul(&theta_z.transpose(), &parts.c1),
        c2: mul(&ry, &parts.c2),
        d11: mul3(&theta_z.transpose(), &parts.d11, &theta_w),
        ru,
        ry,
        m1,
        m2,
        p1,
        p2,
    })
}

fn rows(m: &Mat, r0: usize, n: usize) -> Mat {
    m.view((r0, 0), (n, m.ncols())).into_owned()
}

fn cols(m: &Mat, c0: usize, n: usize) -> Mat {
    m.view((0, c0), (m.nrows(), n)).into_owned()
}

fn sub(m: &Mat, r0: usize, c0: usize, nr: usize, nc: usize) -> Mat {
    m.view((r0, c0), (nr, nc)).into_owned()
}

struct D11Blocks {
    d1111: Mat,
    d1112: Mat,
    d1121: Mat,
    d1122: Mat,
}

impl Normalized {
    fn d11_blocks(&self) -> D11Blocks {
        let (r, c) = (self.p1 - self.m2, self.m1 - self.p2);
        D11Blocks {
            d1111: sub(&self.d11, 0, 0, r, c),
            d1112: sub(&self.d11, 0, c, r, self.p2),
            d1121: sub(&self.d11, r, 0, self.m2, c),
            d1122: sub(&self.d11, r, c, self.m2, self.p2),
        }
    }

    fn d11_bound(&self) -> f64 {
        let b = self.d11_blocks();
        let row = hstack(&[&b.d1111, &b.d1112]);
        let col = vstack(&[&b.d1111, &b.d1121]);
        linalg::sigma_max(&row).max(linalg::sigma_max(&col))
    }

    fn d12(&self) -> Mat {
        vstack(&[&zeros(self.p1 - self.m2, self.m2), &eye(self.m2)])
    }

    fn d21(&self) -> Mat {
        hstack(&[&zeros(self.p2, self.m1 - self.p2), &eye(self.p2)])
    }
}

/// Everything the controller formulas need once both Riccati equations and
/// the coupling test have passed.
struct Solved {
    x: Mat,
    y: Mat,
    f: Mat,
    l: Mat,
    coupling: f64,
}

fn min_eig_ok(x: &Mat, tol: f64) -> core::result::Result<(), f64> {
    let e = linalg::sym_eigenvalues(x);
    let Some(&lo) = e.first() else { return Ok(()) };
    let scale = e.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    if lo >= -tol * scale {
        Ok(())
    } else {
        Err(lo)
    }
}

fn solve_riccatis(nz: &Normalized, gamma: f64, opts: &SynOptions) -> core::result::Result<Solved, Infeasibility> {
    let g2 = gamma * gamma;
    let bound = nz.d11_bound();
    if !(gamma > bound) {
        return Err(Infeasibility::D11Bound { bound });
    }
    let n = nz.a.nrows();
    let b = hstack(&[&nz.b1, &nz.b2]);
    let c = vstack(&[&nz.c1, &nz.c2]);

    let d1_row = hstack(&[&nz.d11, &nz.d12()]);
    let r = mul(&d1_row.transpose(), &d1_row) - blkdiag(&[&(eye(nz.m1) * g2), &zeros(nz.m2, nz.m2)]);
    let ri = linalg::inverse(&r).ok_or(Infeasibility::D11Bound { bound })?;
    let d1_col = vstack(&[&nz.d11, &nz.d21()]);
    let rt = mul(&d1_col, &d1_col.transpose()) - blkdiag(&[&(eye(nz.p1) * g2), &zeros(nz.p2, nz.p2)]);
    let rti = linalg::inverse(&rt).ok_or(Infeasibility::D11Bound { bound })?;

    let dtc = mul(&d1_row.transpose(), &nz.c1);
    let ax = &nz.a - mul3(&b, &ri, &dtc);
    let rx = linalg::symmetrize(&mul3(&b, &ri, &b.transpose()));
    let qx = linalg::symmetrize(&(mul(&nz.c1.transpose(), &nz.c1) - mul3(&dtc.transpose(), &ri, &dtc)));
    let RiccatiSolution { x, .. } = solve_care(&ax, &qx, &rx).map_err(Infeasibility::XRiccati)?;
    min_eig_ok(&x, opts.psd_tol).map_err(|min_eig| Infeasibility::XNotPsd { min_eig })?;

    let db = mul(&d1_col, &nz.b1.transpose());
    let ay = nz.a.transpose() - mul3(&c.transpose(), &rti, &db);
    let ry = linalg::symmetrize(&mul3(&c.transpose(), &rti, &c));
    let qy = linalg::symmetrize(&(mul(&nz.b1, &nz.b1.transpose()) - mul3(&db.transpose(), &rti, &db)));
    let RiccatiSolution { x: y, .. } = solve_care(&ay, &qy, &ry).map_err(Infeasibility::YRiccati)?;
    min_eig_ok(&y, opts.psd_tol).map_err(|min_eig| Infeasibility::YNotPsd { min_eig })?;

    let coupling = linalg::spectral_radius(&mul(&x, &y)).map_err(Infeasibility::XRiccati)?;
    if !(coupling < g2) {
        return Err(Infeasibility::Coupling { rho: coupling });
    }

    let f = -mul(&ri, &(dtc + mul(&b.transpose(), &x)));
    let l = -mul(&(db.transpose() + mul(&y, &c.transpose())), &rti);
    debug_assert_eq!(f.shape(), (nz.m1 + nz.m2, n));
    debug_assert_eq!(l.shape(), (n, nz.p1 + nz.p2));
    Ok(Solved { x, y, f, l, coupling })
}

/// Central controller of the normalized plant, mapped back to the original
/// `u`, `y` coordinates.
fn central_controller(nz: &Normalized, s: &Solved, gamma: f64) -> core::result::Result<StateSpace, Infeasibility> {
    let g2 = gamma * gamma;
    let n = nz.a.nrows();
    let bound = Infeasibility::D11Bound { bound: nz.d11_bound() };
    let D11Blocks { d1111, d1112, d1121, d1122 } = nz.d11_blocks();

    let f11_rows = nz.m1 - nz.p2;
    let f12 = rows(&s.f, f11_rows, nz.p2);
    let f2 = rows(&s.f, nz.m1, nz.m2);
    let l11_cols = nz.p1 - nz.m2;
    let l12 = cols(&s.l, l11_cols, nz.m2);
    let l2 = cols(&s.l, nz.p1, nz.p2);

    let k1 = eye(d1111.nrows()) * g2 - mul(&d1111, &d1111.transpose());
    let k1i = linalg::inverse(&k1).ok_or(bound.clone())?;
    let k2 = eye(d1111.ncols()) * g2 - mul(&d1111.transpose(), &d1111);
    let k2i = linalg::inverse(&k2).ok_or(bound.clone())?;

    let dh11 = -mul(&mul3(&d1121, &d1111.transpose(), &k1i), &d1112) - &d1122;
    let dh12 = linalg::cholesky_lower(&(eye(nz.m2) - mul3(&d1121, &k2i, &d1121.transpose()))).ok_or(bound.clone())?;
    let dh21 = linalg::cholesky_lower(&(eye(nz.p2) - mul3(&d1112.transpose(), &k1i, &d1112)))
        .ok_or(bound.clone())?
        .transpose();
    let dh12i = linalg::inverse(&dh12).ok_or(bound.clone())?;
    let dh21i = linalg::inverse(&dh21).ok_or(bound)?;

    let zi = eye(n) - mul(&s.y, &s.x) / g2;
    let z = linalg::inverse(&zi).ok_or(Infeasibility::Coupling { rho: s.coupling })?;

    let bh2 = mul3(&z, &(&nz.b2 + &l12), &dh12);
    let ch2 = -mul(&dh21, &(&nz.c2 + &f12));
    let bh1 = -mul(&z, &l2) + mul3(&bh2, &dh12i, &dh11);
    let ch1 = &f2 + mul3(&dh11, &dh21i, &ch2);
    let b = hstack(&[&nz.b1, &nz.b2]);
    let ah = &nz.a + mul(&b, &s.f) + mul3(&bh1, &dh21i, &ch2);

    StateSpace::new(ah, mul(&bh1, &nz.ry), mul(&nz.ru, &ch1), mul3(&nz.ru, &dh11, &nz.ry))
        .map_err(Infeasibility::XRiccati)
}

/// Observer-based controller for a plant whose `w → z` map is identically
/// zero; any stabilizing `K` attains norm zero.
fn stabilizing_controller(parts: &Partitioned) -> Result<StateSpace> {
    let n = parts.a.nrows();
    let x = solve_care(&parts.a, &eye(n), &mul(&parts.b2, &parts.b2.transpose()))?.x;
    let y = solve_care(&parts.a.transpose(), &eye(n), &mul(&parts.c2.transpose(), &parts.c2))?.x;
    let f = -mul(&parts.b2.transpose(), &x);
    let l = -mul(&y, &parts.c2.transpose());
    let ak = &parts.a + mul(&parts.b2, &f) + mul(&l, &parts.c2);
    StateSpace::new(ak, -l, f, zeros(parts.b2.ncols(), parts.c2.nrows()))
}

fn verify(p: &StateSpace, nmeas: usize, nctrl: usize, k: &StateSpace, opts: &SynOptions) -> Result<(bool, Option<f64>)> {
    let cl = lft_lower(p, nmeas, nctrl, k)?;
    if !statespace::is_hurwitz(&cl)? {
        return Ok((false, None));
    }
    Ok((true, Some(hinf_norm(&cl, opts.norm_rel_tol)?.norm)))
}

/// γ-suboptimal output-feedback synthesis: finds `K` (same order as `P`)
/// with `F_l(P, K)` Hurwitz and `‖F_l(P, K)‖∞ < γ`, or reports which
/// condition fails.
pub fn hinf_syn(p: &StateSpace, nmeas: usize, nctrl: usize, gamma: f64) -> Result<SynthesisResult> {
    hinf_syn_with(p, nmeas, nctrl, gamma, &SynOptions::default())
}

pub fn hinf_syn_with(p: &StateSpace, nmeas: usize, nctrl: usize, gamma: f64, opts: &SynOptions) -> Result<SynthesisResult> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive and finite, got {gamma}")));
    }
    let parts = check_structure(p, nmeas, nctrl)?;

    let (k, certificate) = if is_zero_coupling(&parts) {
        (stabilizing_controller(&parts)?, None)
    } else {
        let nz = normalize(&parts)?;
        let solved = match solve_riccatis(&nz, gamma, opts) {
            Ok(s) => s,
            Err(why) => return Ok(SynthesisResult::infeasible(gamma, why)),
        };
        let k = match central_controller(&nz, &solved, gamma) {
            Ok(k) => k,
            Err(why) => return Ok(SynthesisResult::infeasible(gamma, why)),
        };
        (k, Some(Certificate { x_inf: solved.x, y_inf: solved.y, coupling: solved.coupling }))
    };

    let (hurwitz, norm) = verify(p, nmeas, nctrl, &k, opts)?;
    let ok = hurwitz && norm.is_some_and(|v| v < gamma);
    Ok(SynthesisResult {
        controller: Some(k),
        gamma_requested: gamma,
        gamma_verified: norm,
        feasible: ok,
        diagnostic: (!ok).then_some(Infeasibility::Verification { hurwitz, norm }),
        certificate,
    })
}

/// Riccati and coupling conditions only; no controller is built.
fn level_feasible(nz: Option<&Normalized>, gamma: f64, opts: &SynOptions) -> bool {
    match nz {
        None => true,
        Some(nz) => solve_riccatis(nz, gamma, opts).is_ok(),
    }
}

/// Bisection for the optimal level. Returns the smallest feasible level
/// found (within `rel_tol`) and the verified controller at
/// `(1 + rel_tol)·γ_opt`.
pub fn hinf_opt_gamma(p: &StateSpace, nmeas: usize, nctrl: usize, rel_tol: f64) -> Result<OptimalLevel> {
    hinf_opt_gamma_with(p, nmeas, nctrl, rel_tol, &SynOptions::default())
}

pub fn hinf_opt_gamma_with(
    p: &StateSpace,
    nmeas: usize,
    nctrl: usize,
    rel_tol: f64,
    opts: &SynOptions,
) -> Result<OptimalLevel> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("rel_tol must be positive, got {rel_tol}")));
    }
    let parts = check_structure(p, nmeas, nctrl)?;
    let nz = if is_zero_coupling(&parts) { None } else { Some(normalize(&parts)?) };
    let bound = nz.as_ref().map_or(0.0, |n| n.d11_bound());
    let feasible = |g: f64| level_feasible(nz.as_ref(), g, opts);

    let mut hi = if bound > 0.0 { 2.0 * bound } else { 1.0 };
    while !feasible(hi) {
        hi *= 2.0;
        if hi > GAMMA_CAP * bound.max(1.0) {
            return Err(Error::Unstabilizable { cap: hi / 2.0 });
        }
    }
    let mut lo;
    loop {
        lo = hi / 2.0;
        if lo <= bound {
            lo = bound;
            break;
        }
        if lo < GAMMA_FLOOR {
            let synthesis = hinf_syn_with(p, nmeas, nctrl, hi, opts)?;
            return Ok(OptimalLevel { gamma_opt: 0.0, below_floor: true, synthesis });
        }
        if !feasible(lo) {
            break;
        }
        hi = lo;
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut level = hi * (1.0 + rel_tol);
    let mut synthesis = hinf_syn_with(p, nmeas, nctrl, level, opts)?;
    // the central controller can lose accuracy right at the optimum
    for _ in 0..4 {
        if synthesis.feasible {
            break;
        }
        level *= 1.0 + rel_tol;
        synthesis = hinf_syn_with(p, nmeas, nctrl, level, opts)?;
    }
    Ok(OptimalLevel { gamma_opt: hi, below_floor: false, synthesis })
}
