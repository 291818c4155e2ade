use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{self, block, mul, Mat, C64};
use crate::{Error, Result};

/// Tolerances for [`solve_care_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CareOptions {
    /// Hamiltonian eigenvalues with `|Re λ| <= imag_tol * max(1, |λ|)` are
    /// treated as lying on the imaginary axis.
    pub imag_tol: f64,
    /// Largest accepted condition number of the stable-subspace basis `U11`.
    pub max_cond: f64,
}

impl Default for CareOptions {
    fn default() -> Self {
        Self { imag_tol: 1e-9, max_cond: 1e12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub x: Mat,
    /// Eigenvalues of `A - R X`.
    pub closed_loop_eigs: Vec<C64>,
    /// `‖AᵀX + XA − XRX + Q‖_F / max(1, ‖X‖_F)`.
    pub residual_norm: f64,
}

/// Stabilizing solution of `AᵀX + XA − X R X + Q = 0`.
pub fn solve_care(a: &Mat, q: &Mat, r: &Mat) -> Result<RiccatiSolution> {
    solve_care_with(a, q, r, &CareOptions::default())
}

pub fn solve_care_with(a: &Mat, q: &Mat, r: &Mat, opts: &CareOptions) -> Result<RiccatiSolution> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) || r.shape() != (n, n) {
        return Err(Error::Dimension(alloc::format!(
            "CARE data must be {n}x{n}: A {:?}, Q {:?}, R {:?}",
            a.shape(),
            q.shape(),
            r.shape()
        )));
    }
    for (m, name) in [(a, "A"), (q, "Q"), (r, "R")] {
        if !linalg::is_finite(m) {
            return Err(Error::NonFinite(name));
        }
    }
    if n == 0 {
        return Ok(RiccatiSolution { x: Mat::zeros(0, 0), closed_loop_eigs: Vec::new(), residual_norm: 0.0 });
    }

    let ham = block(&[&[a, &-r], &[&-q, &-a.transpose()]]);
    let mut schur = linalg::real_schur(&ham)?;
    let eigs = schur.eigenvalues();
    let on_axis = |z: &C64| z.re.abs() <= opts.imag_tol * linalg::cabs(*z).max(1.0);
    if eigs.iter().any(on_axis) {
        return Err(Error::NoStabilizingSolution);
    }
    let stable = linalg::reorder_schur(&mut schur, |z| z.re < 0.0)?;
    if stable != n {
        return Err(Error::NoStabilizingSolution);
    }
    let u11 = schur.z.view((0, 0), (n, n)).into_owned();
    let u21 = schur.z.view((n, 0), (n, n)).into_owned();
    let cond = linalg::cond(&u11);
    if !(cond <= opts.max_cond) {
        return Err(Error::IllConditioned { cond });
    }
    // X U11 = U21  ⇔  U11ᵀ Xᵀ = U21ᵀ
    let xt = linalg::solve(&u11.transpose(), &u21.transpose()).ok_or(Error::IllConditioned { cond })?;
    let mut x = linalg::symmetrize(&xt.transpose());
    let mut residual_norm = care_residual(a, q, r, &x);
    for _ in 0..2 {
        if residual_norm < 1e-14 {
            break;
        }
        let Some(next) = newton_step(a, q, r, &x) else { break };
        let next_res = care_residual(a, q, r, &next);
        if next_res >= residual_norm {
            break;
        }
        x = next;
        residual_norm = next_res;
    }

    let closed_loop_eigs = linalg::eigenvalues(&(a - mul(r, &x)))?;
    Ok(RiccatiSolution { x, closed_loop_eigs, residual_norm })
}

/// One Newton correction: `(A − RX)ᵀΔ + Δ(A − RX) = −Res(X)`, solved through
/// its Kronecker form.
fn newton_step(a: &Mat, q: &Mat, r: &Mat, x: &Mat) -> Option<Mat> {
    let n = a.nrows();
    if n > 30 {
        return None;
    }
    let acl = a - mul(r, x);
    let xa = mul(x, a);
    let res = &xa.transpose() + &xa - linalg::mul3(x, r, x) + q;
    // vec(AᵀΔ + ΔA) = (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(Δ) with column-major vec
    let mut k = Mat::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for l in 0..n {
                k[(row, j * n + l)] += acl[(l, i)];
                k[(row, l * n + i)] += acl[(l, j)];
            }
        }
    }
    let rhs = Mat::from_column_slice(n * n, 1, (-res).as_slice());
    let d = linalg::solve(&k, &rhs)?;
    let delta = Mat::from_column_slice(n, n, d.as_slice());
    Some(linalg::symmetrize(&(x + delta)))
}

pub fn care_residual(a: &Mat, q: &Mat, r: &Mat, x: &Mat) -> f64 {
    let xa = mul(x, a);
    let res = &xa.transpose() + &xa - linalg::mul3(x, r, x) + q;
    linalg::fro_norm(&res) / linalg::fro_norm(x).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn scalar_examples() {
        let s = solve_care(&scalar(-1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((s.x[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert_relative_eq!(s.closed_loop_eigs[0].re, -(2f64.sqrt()), epsilon = 1e-12);

        let s = solve_care(&scalar(0.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_relative_eq!(s.x[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.closed_loop_eigs[0].re, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn imaginary_axis_hamiltonian_is_rejected() {
        // A = 0, R = 0, Q = 0: every Hamiltonian eigenvalue is zero
        assert_eq!(
            solve_care(&scalar(0.0), &scalar(0.0), &scalar(0.0)),
            Err(Error::NoStabilizingSolution)
        );
        // undamped oscillator with no control authority
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(solve_care(&a, &Mat::identity(2, 2), &Mat::zeros(2, 2)).is_err());
    }

    #[test]
    fn indefinite_r_as_in_hinf_usage() {
        // R = B Bᵀ − γ⁻² B1 B1ᵀ with γ large enough stays solvable
        let a = Mat::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, 0.5]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        let b1 = Mat::from_row_slice(2, 1, &[1.0, 1.0]);
        let r = &b * b.transpose() - &b1 * b1.transpose() * 0.01;
        let s = solve_care(&a, &Mat::identity(2, 2), &r).unwrap();
        assert!(s.residual_norm < 1e-12);
        assert!(s.closed_loop_eigs.iter().all(|z| z.re < 0.0));
    }

    #[test]
    fn random_lqr_instances_have_small_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = 1 + trial % 6;
            let m = 1 + trial % 3;
            let a = Mat::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let b = Mat::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
            let c = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let q = c.transpose() * &c + Mat::identity(n, n) * 0.1;
            let r = &b * b.transpose();
            let s = solve_care(&a, &q, &r).unwrap();
            assert!(s.residual_norm < 1e-10, "trial {trial}: residual {}", s.residual_norm);
            assert!(s.closed_loop_eigs.iter().all(|z| z.re < 0.0));
            assert!(linalg::sym_eigenvalues(&s.x)[0] > -1e-10);
            assert_eq!(s.x, s.x.transpose());
        }
    }
}
