//! Dense real/complex matrix helpers shared by every other module.
//!
//! Storage and the basic factorizations (LU, SVD, Cholesky, symmetric
//! eigen) come from `nalgebra`; the nonsymmetric eigenproblem is solved by
//! the in-repo real Schur code in [`schur`].

pub mod schur;

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};

pub use schur::{eigenvalues, full_qr, real_schur, reorder_schur, RealSchur};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;
pub type C64 = Complex<f64>;
pub type Vector = DVector<f64>;

pub fn zeros(rows: usize, cols: usize) -> Mat {
    Mat::zeros(rows, cols)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// Builds a matrix from a grid of blocks. Every block in a block-row must
/// share its row count and every block in a block-column its column count.
pub fn block(rows: &[&[&Mat]]) -> Mat {
    let heights: Vec<usize> = rows.iter().map(|r| r.first().map_or(0, |m| m.nrows())).collect();
    let widths: Vec<usize> = rows
        .first()
        .map(|r| r.iter().map(|m| m.ncols()).collect())
        .unwrap_or_default();
    let total_r: usize = heights.iter().sum();
    let total_c: usize = widths.iter().sum();
    let mut out = Mat::zeros(total_r, total_c);
    let mut r0 = 0;
    for (bi, row) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (bj, m) in row.iter().enumerate() {
            debug_assert_eq!(m.nrows(), heights[bi], "block row height");
            debug_assert_eq!(m.ncols(), widths[bj], "block column width");
            out.view_mut((r0, c0), (m.nrows(), m.ncols())).copy_from(m);
            c0 += widths[bj];
        }
        r0 += heights[bi];
    }
    out
}

pub fn hstack(blocks: &[&Mat]) -> Mat {
    block(&[blocks])
}

pub fn vstack(blocks: &[&Mat]) -> Mat {
    let rows: Vec<[&Mat; 1]> = blocks.iter().map(|m| [*m]).collect();
    let refs: Vec<&[&Mat]> = rows.iter().map(|r| &r[..]).collect();
    block(&refs)
}

pub fn blkdiag(blocks: &[&Mat]) -> Mat {
    let n: usize = blocks.iter().map(|m| m.nrows()).sum();
    let c: usize = blocks.iter().map(|m| m.ncols()).sum();
    let mut out = Mat::zeros(n, c);
    let (mut r0, mut c0) = (0, 0);
    for m in blocks {
        out.view_mut((r0, c0), (m.nrows(), m.ncols())).copy_from(*m);
        r0 += m.nrows();
        c0 += m.ncols();
    }
    out
}

/// `a * b` that tolerates empty inner dimensions.
pub fn mul(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.ncols(), b.nrows(), "inner dimension");
    if a.ncols() == 0 || a.nrows() == 0 || b.ncols() == 0 {
        return Mat::zeros(a.nrows(), b.ncols());
    }
    a * b
}

pub fn mul3(a: &Mat, b: &Mat, c: &Mat) -> Mat {
    mul(&mul(a, b), c)
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub fn is_zero(m: &Mat) -> bool {
    m.iter().all(|&x| x == 0.0)
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn singular_values_c(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value; zero for an empty matrix.
pub fn sigma_max(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn sigma_max_c(m: &CMat) -> f64 {
    singular_values_c(m).first().copied().unwrap_or(0.0)
}

/// 2-norm condition number; infinite for singular or non-square input.
pub fn cond(m: &Mat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    if m.is_empty() {
        return 1.0;
    }
    let s = singular_values(m);
    let smin = s[s.len() - 1];
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

/// Numerical rank with tolerance `rtol * sigma_max` (and an absolute floor).
pub fn rank_c(m: &CMat, rtol: f64) -> usize {
    let s = singular_values_c(m);
    let Some(&top) = s.first() else { return 0 };
    let tol = rtol * top.max(1.0);
    s.iter().filter(|&&x| x > tol).count()
}

pub fn inverse(m: &Mat) -> Option<Mat> {
    if m.nrows() != m.ncols() {
        return None;
    }
    if m.is_empty() {
        return Some(Mat::zeros(0, 0));
    }
    let inv = m.clone().lu().try_inverse()?;
    is_finite(&inv).then_some(inv)
}

/// Solves `a x = b` with partial-pivoting LU.
pub fn solve(a: &Mat, b: &Mat) -> Option<Mat> {
    if a.is_empty() {
        return Some(Mat::zeros(0, b.ncols()));
    }
    let x = a.clone().lu().solve(b)?;
    is_finite(&x).then_some(x)
}

pub fn solve_c(a: &CMat, b: &CMat) -> Option<CMat> {
    if a.is_empty() {
        return Some(CMat::zeros(0, b.ncols()));
    }
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut e: Vec<f64> = symmetrize(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Lower Cholesky factor `L` with `L Lᵀ = m`; `None` unless `m ≻ 0`.
pub fn cholesky_lower(m: &Mat) -> Option<Mat> {
    if m.is_empty() {
        return Some(Mat::zeros(0, 0));
    }
    symmetrize(m).cholesky().map(|c| c.l())
}

/// Spectral radius via the real Schur form.
pub fn spectral_radius(m: &Mat) -> crate::Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| cabs(*z)).fold(0.0, f64::max))
}

pub fn cabs(z: C64) -> f64 {
    z.re.hypot(z.im)
}

pub fn fro_norm(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}
