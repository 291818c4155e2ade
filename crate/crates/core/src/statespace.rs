//! Continuous-time LTI realizations `(A, B, C, D)` and the algebra the
//! design pipeline needs: stability tests, PBH rank tests, frequency
//! response, lower linear fractional transformation and inversion.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use crate::linalg::{self, block, eye, mul, mul3, zeros, CMat, Mat, C64};
use crate::{Error, Result};

/// Eigenvalues with real part inside `±margin` count as marginal.
pub const DEFAULT_STABILITY_MARGIN: f64 = 1e-9;
/// Largest feedthrough condition number accepted by [`invert_realization`].
pub const DEFAULT_MAX_COND: f64 = 1e12;

/// A real state-space realization. Fields are private so every instance
/// has consistent dimensions and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}, must be square", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, A has {}", b.nrows(), n)));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, A has {}", c.ncols(), n)));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if !linalg::is_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Row-major convenience constructor.
    pub fn from_rows(n: usize, m: usize, p: usize, a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Self> {
        if a.len() != n * n || b.len() != n * m || c.len() != p * n || d.len() != p * m {
            return Err(Error::Dimension(format!("slice lengths do not match n={n}, m={m}, p={p}")));
        }
        Self::new(
            Mat::from_row_slice(n, n, a),
            Mat::from_row_slice(n, m, b),
            Mat::from_row_slice(p, n, c),
            Mat::from_row_slice(p, m, d),
        )
    }

    /// Memoryless gain `y = D u`.
    pub fn gain(d: Mat) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(zeros(0, 0), zeros(0, m), zeros(p, 0), d)
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn into_parts(self) -> (Mat, Mat, Mat, Mat) {
        (self.a, self.b, self.c, self.d)
    }

    pub fn poles(&self) -> Result<Vec<C64>> {
        linalg::eigenvalues(&self.a)
    }

    /// Realization in the coordinates `x = T x̃`.
    pub fn similarity(&self, t: &Mat) -> Result<Self> {
        let ti = linalg::inverse(t).ok_or(Error::NotInvertible { cond: linalg::cond(t) })?;
        Self::new(mul3(&ti, &self.a, t), mul(&ti, &self.b), mul(&self.c, t), self.d.clone())
    }

    /// `next ∘ self`: the output of `self` drives `next`.
    pub fn series(&self, next: &StateSpace) -> Result<Self> {
        if next.inputs() != self.outputs() {
            return Err(Error::Dimension(format!(
                "series: {} outputs feed {} inputs",
                self.outputs(),
                next.inputs()
            )));
        }
        let a = block(&[
            &[&self.a, &zeros(self.states(), next.states())],
            &[&mul(&next.b, &self.c), &next.a],
        ]);
        let b = linalg::vstack(&[&self.b, &mul(&next.b, &self.d)]);
        let c = linalg::hstack(&[&mul(&next.d, &self.c), &next.c]);
        let d = mul(&next.d, &self.d);
        Self::new(a, b, c, d)
    }

    /// Output rows `rows` and input columns `cols` of the realization.
    pub fn subsystem(&self, rows: core::ops::Range<usize>, cols: core::ops::Range<usize>) -> Result<Self> {
        let n = self.states();
        let b = self.b.view((0, cols.start), (n, cols.len())).into_owned();
        let c = self.c.view((rows.start, 0), (rows.len(), n)).into_owned();
        let d = self.d.view((rows.start, cols.start), (rows.len(), cols.len())).into_owned();
        Self::new(self.a.clone(), b, c, d)
    }

    pub fn scale_output(&self, k: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), &self.c * k, &self.d * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// Every pole has real part below `-margin`.
    Stable,
    /// No pole right of `+margin`, but at least one within `±margin`.
    Marginal,
    Unstable,
}

pub fn stability(ss: &StateSpace, margin: f64) -> Result<Stability> {
    let poles = ss.poles()?;
    if poles.iter().any(|z| z.re > margin) {
        Ok(Stability::Unstable)
    } else if poles.iter().any(|z| z.re >= -margin) {
        Ok(Stability::Marginal)
    } else {
        Ok(Stability::Stable)
    }
}

pub fn is_hurwitz(ss: &StateSpace) -> Result<bool> {
    is_hurwitz_with(ss, DEFAULT_STABILITY_MARGIN)
}

pub fn is_hurwitz_with(ss: &StateSpace, margin: f64) -> Result<bool> {
    Ok(stability(ss, margin)? == Stability::Stable)
}

/// Largest real part among the poles (`-inf` for a static gain).
pub fn spectral_abscissa(ss: &StateSpace) -> Result<f64> {
    Ok(ss.poles()?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PbhReport {
    pub stabilizable: bool,
    pub detectable: bool,
}

const PBH_RTOL: f64 = 1e-10;

/// PBH rank tests at every pole with nonnegative real part.
pub fn check_stabilizable_detectable(ss: &StateSpace) -> Result<PbhReport> {
    let n = ss.states();
    let poles = ss.poles()?;
    let a = linalg::to_complex(ss.a());
    let b = linalg::to_complex(ss.b());
    let ct = linalg::to_complex(&ss.c().transpose());
    let at = a.transpose();
    let mut report = PbhReport { stabilizable: true, detectable: true };
    for lambda in poles.iter().filter(|z| z.re >= -DEFAULT_STABILITY_MARGIN) {
        let shift = CMat::from_diagonal_element(n, n, *lambda);
        let ctrl = concat_cols(&(&a - &shift), &b);
        if linalg::rank_c(&ctrl, PBH_RTOL) < n {
            report.stabilizable = false;
        }
        let obs = concat_cols(&(&at - &shift), &ct);
        if linalg::rank_c(&obs, PBH_RTOL) < n {
            report.detectable = false;
        }
    }
    Ok(report)
}

fn concat_cols(x: &CMat, y: &CMat) -> CMat {
    let mut out = CMat::zeros(x.nrows(), x.ncols() + y.ncols());
    out.view_mut((0, 0), x.shape()).copy_from(x);
    out.view_mut((0, x.ncols()), y.shape()).copy_from(y);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponseSample {
    pub omega: f64,
    pub g: CMat,
    pub sigma_max: f64,
}

/// Evaluates `G(jω) = C (jωI - A)⁻¹ B + D`.
pub fn freq_response(ss: &StateSpace, omega: f64) -> Result<FrequencyResponseSample> {
    let g = eval_at(ss, C64::new(0.0, omega)).ok_or(Error::ResolventSingular { omega })?;
    let sigma_max = linalg::sigma_max_c(&g);
    Ok(FrequencyResponseSample { omega, g, sigma_max })
}

/// Transfer matrix at an arbitrary complex point; `None` when `sI - A` is
/// numerically singular.
pub fn eval_at(ss: &StateSpace, s: C64) -> Option<CMat> {
    let n = ss.states();
    let d = linalg::to_complex(ss.d());
    if n == 0 {
        return Some(d);
    }
    let resolvent = CMat::from_diagonal_element(n, n, s) - linalg::to_complex(ss.a());
    let sv = linalg::singular_values_c(&resolvent);
    let (smax, smin) = (sv[0], sv[sv.len() - 1]);
    if smin <= 1e-14 * smax.max(1.0) {
        return None;
    }
    let x = linalg::solve_c(&resolvent, &linalg::to_complex(ss.b()))?;
    Some(linalg::to_complex(ss.c()) * x + d)
}

/// Lower LFT `F_l(P, K)`: the last `nctrl` inputs and `nmeas` outputs of
/// `P` are closed through `K` (which maps `nmeas` → `nctrl`). States are
/// ordered plant first, controller second.
pub fn lft_lower(p: &StateSpace, nmeas: usize, nctrl: usize, k: &StateSpace) -> Result<StateSpace> {
    if nmeas > p.outputs() || nctrl > p.inputs() {
        return Err(Error::Dimension(format!(
            "partition ({nmeas} meas, {nctrl} ctrl) exceeds plant {}x{}",
            p.outputs(),
            p.inputs()
        )));
    }
    if k.inputs() != nmeas || k.outputs() != nctrl {
        return Err(Error::Dimension(format!(
            "controller is {}x{}, expected {}x{}",
            k.outputs(),
            k.inputs(),
            nctrl,
            nmeas
        )));
    }
    let parts = Partitioned::split(p, nmeas, nctrl);
    let Partitioned { a, b1, b2, c1, c2, d11, d12, d21, d22 } = &parts;
    let (ak, bk, ck, dk) = (k.a(), k.b(), k.c(), k.d());

    let (a_cl, b_cl, c_cl, d_cl) = if linalg::is_zero(d22) {
        (
            block(&[&[&(a + mul3(b2, dk, c2)), &mul(b2, ck)], &[&mul(bk, c2), ak]]),
            linalg::vstack(&[&(b1 + mul3(b2, dk, d21)), &mul(bk, d21)]),
            linalg::hstack(&[&(c1 + mul3(d12, dk, c2)), &mul(d12, ck)]),
            d11 + mul3(d12, dk, d21),
        )
    } else {
        let r = eye(nmeas) - mul(d22, dk);
        let rt = eye(nctrl) - mul(dk, d22);
        let ri = linalg::inverse(&r).ok_or(Error::AlgebraicLoop)?;
        let rti = linalg::inverse(&rt).ok_or(Error::AlgebraicLoop)?;
        let b2r = mul(b2, &rti);
        let d12r = mul(d12, &rti);
        let bkr = mul(bk, &ri);
        (
            block(&[
                &[&(a + mul3(&b2r, dk, c2)), &mul(&b2r, ck)],
                &[&mul(&bkr, c2), &(ak + mul3(&bkr, d22, ck))],
            ]),
            linalg::vstack(&[&(b1 + mul3(&b2r, dk, d21)), &mul(&bkr, d21)]),
            linalg::hstack(&[&(c1 + mul3(&d12r, dk, c2)), &mul(&d12r, ck)]),
            d11 + mul3(&d12r, dk, d21),
        )
    };
    StateSpace::new(a_cl, b_cl, c_cl, d_cl)
}

/// The nine blocks of a generalized plant split by the measured output and
/// control input widths.
#[derive(Debug, Clone)]
pub struct Partitioned {
    pub a: Mat,
    pub b1: Mat,
    pub b2: Mat,
    pub c1: Mat,
    pub c2: Mat,
    pub d11: Mat,
    pub d12: Mat,
    pub d21: Mat,
    pub d22: Mat,
}

impl Partitioned {
    pub fn split(p: &StateSpace, nmeas: usize, nctrl: usize) -> Self {
        let n = p.states();
        let m1 = p.inputs() - nctrl;
        let p1 = p.outputs() - nmeas;
        Self {
            a: p.a().clone(),
            b1: p.b().view((0, 0), (n, m1)).into_owned(),
            b2: p.b().view((0, m1), (n, nctrl)).into_owned(),
            c1: p.c().view((0, 0), (p1, n)).into_owned(),
            c2: p.c().view((p1, 0), (nmeas, n)).into_owned(),
            d11: p.d().view((0, 0), (p1, m1)).into_owned(),
            d12: p.d().view((0, m1), (p1, nctrl)).into_owned(),
            d21: p.d().view((p1, 0), (nmeas, m1)).into_owned(),
            d22: p.d().view((p1, m1), (nmeas, nctrl)).into_owned(),
        }
    }

    pub fn assemble(&self) -> Result<StateSpace> {
        StateSpace::new(
            self.a.clone(),
            linalg::hstack(&[&self.b1, &self.b2]),
            linalg::vstack(&[&self.c1, &self.c2]),
            block(&[&[&self.d11, &self.d12], &[&self.d21, &self.d22]]),
        )
    }
}

/// Realization of `G(s)⁻¹` for square `G` with invertible feedthrough:
/// `(A - B D⁻¹ C, B D⁻¹, -D⁻¹ C, D⁻¹)`.
pub fn invert_realization(ss: &StateSpace) -> Result<StateSpace> {
    invert_realization_with(ss, DEFAULT_MAX_COND)
}

pub fn invert_realization_with(ss: &StateSpace, max_cond: f64) -> Result<StateSpace> {
    if ss.inputs() != ss.outputs() {
        return Err(Error::Dimension(format!(
            "only square systems are invertible, got {}x{}",
            ss.outputs(),
            ss.inputs()
        )));
    }
    let cond = linalg::cond(ss.d());
    if !(cond <= max_cond) {
        return Err(Error::NotInvertible { cond });
    }
    let di = linalg::inverse(ss.d()).ok_or(Error::NotInvertible { cond })?;
    let bdi = mul(ss.b(), &di);
    let dic = mul(&di, ss.c());
    StateSpace::new(ss.a() - mul(&bdi, ss.c()), bdi, -dic, di)
}
