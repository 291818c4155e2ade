use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{self, block, eye, mul, mul3};
#[cfg(test)]
use crate::linalg::Mat;
use crate::statespace::{self, StateSpace};
use crate::{Error, Result};

pub const DEFAULT_NORM_REL_TOL: f64 = 1e-6;

const MAX_ITER: usize = 200;
const IMAG_TOL: f64 = 1e-6;
const CONFIRM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfNorm {
    pub norm: f64,
    /// Frequency (rad/s) where the peak was found; `f64::INFINITY` when the
    /// feedthrough alone attains it.
    pub peak_omega: f64,
}

/// H∞ norm of a Hurwitz system.
///
/// A level `γ` is tested through the imaginary-axis eigenvalues of the
/// Hamiltonian
/// `[A + B R⁻¹DᵀC, B R⁻¹Bᵀ; −Cᵀ(I + D R⁻¹Dᵀ)C, −(A + B R⁻¹DᵀC)ᵀ]`,
/// `R = γ²I − DᵀD`. The lower bound is raised to the largest gain found at
/// the crossing frequencies and their midpoints until no crossing remains at
/// `(1 + rel_tol)` times the bound.
pub fn hinf_norm(ss: &StateSpace, rel_tol: f64) -> Result<HinfNorm> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("rel_tol must be positive, got {rel_tol}")));
    }
    if !statespace::is_hurwitz(ss)? {
        return Err(Error::NotHurwitz);
    }
    let d_gain = linalg::sigma_max(ss.d());
    let mut best = HinfNorm { norm: d_gain, peak_omega: f64::INFINITY };
    if ss.states() == 0 || linalg::is_zero(ss.b()) || linalg::is_zero(ss.c()) {
        return Ok(best);
    }

    let gain = |w: f64| -> Result<f64> { Ok(statespace::freq_response(ss, w)?.sigma_max) };
    let consider = |w: f64, best: &mut HinfNorm| -> Result<()> {
        let g = gain(w)?;
        if g > best.norm {
            *best = HinfNorm { norm: g, peak_omega: w };
        }
        Ok(())
    };

    let mut seeds: Vec<f64> = alloc::vec![0.0];
    for z in ss.poles()? {
        seeds.push(linalg::cabs(z));
        if z.im.abs() > 0.0 {
            seeds.push(z.im.abs());
        }
    }
    for w in seeds {
        consider(w, &mut best)?;
    }
    if best.norm == 0.0 {
        for w in linalg::logspace(1e-4, 1e6, 61) {
            consider(w, &mut best)?;
        }
        if best.norm == 0.0 {
            return Ok(HinfNorm { norm: 0.0, peak_omega: 0.0 });
        }
    }

    for _ in 0..MAX_ITER {
        let level = best.norm * (1.0 + rel_tol);
        let mut crossings: Vec<f64> = Vec::new();
        for w in imaginary_frequencies(ss, level)? {
            let g = gain(w)?;
            if g >= level * (1.0 - CONFIRM_TOL) {
                crossings.push(w);
                if g > best.norm {
                    best = HinfNorm { norm: g, peak_omega: w };
                }
            }
        }
        if crossings.is_empty() {
            return Ok(best);
        }
        crossings.sort_by(f64::total_cmp);
        let before = best.norm;
        for pair in crossings.windows(2) {
            consider(0.5 * (pair[0] + pair[1]), &mut best)?;
        }
        if best.norm <= before {
            // crossings only touch the level: the Hamiltonian test cannot
            // resolve the peak any further
            return Ok(best);
        }
    }
    Err(Error::NoConvergence)
}

/// Nonnegative `ω` such that `jω` is an eigenvalue of the level-`γ`
/// Hamiltonian.
fn imaginary_frequencies(ss: &StateSpace, gamma: f64) -> Result<Vec<f64>> {
    let (a, b, c, d) = (ss.a(), ss.b(), ss.c(), ss.d());
    let r = eye(d.ncols()) * (gamma * gamma) - mul(&d.transpose(), d);
    let ri = linalg::inverse(&r).ok_or(Error::NotInvertible { cond: linalg::cond(&r) })?;
    let ah = a + mul3(b, &ri, &mul(&d.transpose(), c));
    let top_right = mul3(b, &ri, &b.transpose());
    let inner = eye(d.nrows()) + mul3(d, &ri, &d.transpose());
    let bottom_left = -mul3(&c.transpose(), &inner, c);
    let ham = block(&[&[&ah, &top_right], &[&bottom_left, &-ah.transpose()]]);
    let scale = linalg::max_abs(&ham).max(1.0);
    Ok(linalg::eigenvalues(&ham)?
        .into_iter()
        .filter(|z| z.im >= 0.0 && z.re.abs() <= IMAG_TOL * scale.max(linalg::cabs(*z)))
        .map(|z| z.im)
        .collect())
}
