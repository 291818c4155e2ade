//! Real Schur decomposition `A = Z T Zᵀ` by Householder reduction to upper
//! Hessenberg form followed by the Francis double-shift QR iteration, plus
//! reordering of diagonal blocks so a selected group of eigenvalues leads.
//!
//! `T` is quasi upper triangular. Every 2×2 diagonal block is kept in the
//! standardized form `[a b; c a]` with `b·c < 0`, so a nonzero subdiagonal
//! entry always marks a complex conjugate pair.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;


use super::{Mat, C64};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RealSchur {
    pub t: Mat,
    pub z: Mat,
}

impl RealSchur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        quasi_triangular_eigenvalues(&self.t)
    }
}

/// Reflector `P = I - beta v vᵀ` with `P x = alpha e₁`.
fn house(x: &[f64]) -> (Vec<f64>, f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = x.to_vec();
    if norm == 0.0 {
        return (v, 0.0);
    }
    let alpha = if x[0] >= 0.0 { -norm } else { norm };
    v[0] -= alpha;
    let vv: f64 = v.iter().map(|a| a * a).sum();
    if vv == 0.0 {
        return (v, 0.0);
    }
    (v, 2.0 / vv)
}

/// Rows `r0..r0+len`, columns `c0..c_end` ← `P ·` that block.
fn apply_left(m: &mut Mat, r0: usize, c0: usize, c_end: usize, v: &[f64], beta: f64) {
    if beta == 0.0 {
        return;
    }
    for j in c0..c_end {
        let s: f64 = v.iter().enumerate().map(|(i, vi)| vi * m[(r0 + i, j)]).sum();
        let s = beta * s;
        for (i, vi) in v.iter().enumerate() {
            m[(r0 + i, j)] -= s * vi;
        }
    }
}

/// Rows `r_begin..r_end`, columns `c0..c0+len` ← that block `· P`.
fn apply_right(m: &mut Mat, r_begin: usize, r_end: usize, c0: usize, v: &[f64], beta: f64) {
    if beta == 0.0 {
        return;
    }
    for i in r_begin..r_end {
        let s: f64 = v.iter().enumerate().map(|(j, vj)| vj * m[(i, c0 + j)]).sum();
        let s = beta * s;
        for (j, vj) in v.iter().enumerate() {
            m[(i, c0 + j)] -= s * vj;
        }
    }
}

/// Plane rotation `x' = c x + s y`, `y' = c y - s x` on two rows.
fn rot_rows(m: &mut Mat, r1: usize, r2: usize, c0: usize, c_end: usize, c: f64, s: f64) {
    for j in c0..c_end {
        let (x, y) = (m[(r1, j)], m[(r2, j)]);
        m[(r1, j)] = c * x + s * y;
        m[(r2, j)] = c * y - s * x;
    }
}

fn rot_cols(m: &mut Mat, c1: usize, c2: usize, r0: usize, r_end: usize, c: f64, s: f64) {
    for i in r0..r_end {
        let (x, y) = (m[(i, c1)], m[(i, c2)]);
        m[(i, c1)] = c * x + s * y;
        m[(i, c2)] = c * y - s * x;
    }
}

/// Reduces `a` to upper Hessenberg `H = Qᵀ A Q`. Returns `(H, Q)`.
pub fn hessenberg(a: &Mat) -> (Mat, Mat) {
    let n = a.nrows();
    let mut h = a.clone();
    let mut q = Mat::identity(n, n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let (v, beta) = house(&x);
        apply_left(&mut h, k + 1, k, n, &v, beta);
        apply_right(&mut h, 0, n, k + 1, &v, beta);
        apply_right(&mut q, 0, n, k + 1, &v, beta);
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
    (h, q)
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Standardized Schur factorization of a real 2×2 block (LAPACK `dlanv2`).
/// Returns the new entries `(a, b, c, d)` and the rotation `(cs, sn)` with
/// `old = R new Rᵀ`, `R = [cs -sn; sn cs]`.
fn lanv2(mut a: f64, mut b: f64, mut c: f64, mut d: f64) -> ([f64; 4], f64, f64) {
    let eps = f64::EPSILON;
    let (mut cs, mut sn);
    if c == 0.0 {
        cs = 1.0;
        sn = 0.0;
    } else if b == 0.0 {
        cs = 0.0;
        sn = 1.0;
        core::mem::swap(&mut a, &mut d);
        b = -c;
        c = 0.0;
    } else if (a - d) == 0.0 && b.signum() != c.signum() {
        cs = 1.0;
        sn = 0.0;
    } else {
        let temp = a - d;
        let mut p = 0.5 * temp;
        let bcmax = b.abs().max(c.abs());
        let bcmis = b.abs().min(c.abs()) * b.signum() * c.signum();
        let scale = p.abs().max(bcmax);
        let mut z = p / scale * p + bcmax / scale * bcmis;
        if z >= 4.0 * eps {
            // real eigenvalues
            z = p + sign(scale.sqrt() * z.sqrt(), p);
            a = d + z;
            d -= bcmax / z * bcmis;
            let tau = c.hypot(z);
            cs = z / tau;
            sn = c / tau;
            b -= c;
            c = 0.0;
        } else {
            // complex, or real and almost equal
            let sigma = b + c;
            let tau = sigma.hypot(temp);
            cs = (0.5 * (1.0 + sigma.abs() / tau)).sqrt();
            sn = -(p / (tau * cs)) * sign(1.0, sigma);
            let aa = a * cs + b * sn;
            let bb = -a * sn + b * cs;
            let cc = c * cs + d * sn;
            let dd = -c * sn + d * cs;
            a = aa * cs + cc * sn;
            b = bb * cs + dd * sn;
            c = -aa * sn + cc * cs;
            d = -bb * sn + dd * cs;
            let temp = 0.5 * (a + d);
            a = temp;
            d = temp;
            if c != 0.0 {
                if b != 0.0 {
                    if b.signum() == c.signum() {
                        // real eigenvalues after all
                        let sab = b.abs().sqrt();
                        let sac = c.abs().sqrt();
                        p = sign(sab * sac, c);
                        let tau = 1.0 / (b + c).abs().sqrt();
                        a = temp + p;
                        d = temp - p;
                        b -= c;
                        c = 0.0;
                        let cs1 = sab * tau;
                        let sn1 = sac * tau;
                        let t2 = cs * cs1 - sn * sn1;
                        sn = cs * sn1 + sn * cs1;
                        cs = t2;
                    }
                } else {
                    b = -c;
                    c = 0.0;
                    let t2 = cs;
                    cs = -sn;
                    sn = t2;
                }
            }
        }
    }
    ([a, b, c, d], cs, sn)
}

/// Standardizes the 2×2 block at `(k, k)` in place, updating `z`.
fn standardize_block(t: &mut Mat, z: &mut Mat, k: usize) {
    let n = t.nrows();
    let ([a, b, c, d], cs, sn) = lanv2(t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
    t[(k, k)] = a;
    t[(k, k + 1)] = b;
    t[(k + 1, k)] = c;
    t[(k + 1, k + 1)] = d;
    rot_rows(t, k, k + 1, k + 2, n, cs, sn);
    rot_cols(t, k, k + 1, 0, k, cs, sn);
    rot_cols(z, k, k + 1, 0, n, cs, sn);
}

/// One implicit double-shift (Francis) step on the active window `lo..=hi`.
fn francis_step(h: &mut Mat, z: &mut Mat, lo: usize, hi: usize, s: f64, t: f64) {
    let n = h.nrows();
    let mut x = h[(lo, lo)] * h[(lo, lo)] + h[(lo, lo + 1)] * h[(lo + 1, lo)] - s * h[(lo, lo)] + t;
    let mut y = h[(lo + 1, lo)] * (h[(lo, lo)] + h[(lo + 1, lo + 1)] - s);
    let mut w = h[(lo + 1, lo)] * h[(lo + 2, lo + 1)];
    for k in lo..=hi - 2 {
        let (v, beta) = house(&[x, y, w]);
        let c0 = if k > lo { k - 1 } else { lo };
        apply_left(h, k, c0, n, &v, beta);
        let r_end = (k + 3).min(hi) + 1;
        apply_right(h, 0, r_end, k, &v, beta);
        apply_right(z, 0, n, k, &v, beta);
        if k > lo {
            h[(k + 1, k - 1)] = 0.0;
            h[(k + 2, k - 1)] = 0.0;
        }
        x = h[(k + 1, k)];
        y = h[(k + 2, k)];
        if k < hi - 2 {
            w = h[(k + 3, k)];
        }
    }
    let (v, beta) = house(&[x, y]);
    apply_left(h, hi - 1, hi - 2, n, &v, beta);
    apply_right(h, 0, hi + 1, hi - 1, &v, beta);
    apply_right(z, 0, n, hi - 1, &v, beta);
    h[(hi, hi - 2)] = 0.0;
}

/// Real Schur decomposition of a square matrix.
pub fn real_schur(a: &Mat) -> Result<RealSchur> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(alloc::format!("real_schur needs a square matrix, got {}x{}", n, a.ncols())));
    }
    if !super::is_finite(a) {
        return Err(Error::NonFinite("real_schur input"));
    }
    let (mut t, mut z) = hessenberg(a);
    if n == 0 {
        return Ok(RealSchur { t, z });
    }
    let eps = f64::EPSILON;
    let anorm = super::fro_norm(&t).max(f64::MIN_POSITIVE);
    let max_iter = 40 * n.max(1);
    let mut iter = 0usize;
    let mut total = 0usize;
    let mut hi = n as isize - 1;
    while hi >= 0 {
        let h_ = hi as usize;
        // deflation scan
        let mut l = h_;
        while l > 0 {
            let mut s = t[(l - 1, l - 1)].abs() + t[(l, l)].abs();
            if s == 0.0 {
                s = anorm;
            }
            if t[(l, l - 1)].abs() <= eps * s {
                t[(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }
        if l == h_ {
            hi -= 1;
            iter = 0;
            continue;
        }
        if l + 1 == h_ {
            standardize_block(&mut t, &mut z, l);
            hi -= 2;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_iter * n {
            return Err(Error::NoConvergence);
        }
        let (s, p) = if iter % 11 == 10 {
            // exceptional shift
            let w = t[(h_, h_ - 1)].abs() + t[(h_ - 1, h_ - 2)].abs();
            let h11 = 0.75 * w + t[(h_, h_)];
            let h12 = -0.4375 * w;
            let h21 = w;
            (2.0 * h11, h11 * h11 - h12 * h21)
        } else {
            let (a11, a12, a21, a22) = (t[(h_ - 1, h_ - 1)], t[(h_ - 1, h_)], t[(h_, h_ - 1)], t[(h_, h_)]);
            (a11 + a22, a11 * a22 - a12 * a21)
        };
        francis_step(&mut t, &mut z, l, h_, s, p);
    }
    for j in 0..n {
        for i in j + 2..n {
            t[(i, j)] = 0.0;
        }
    }
    Ok(RealSchur { t, z })
}

/// Size (1 or 2) of the diagonal block starting at `k`.
pub fn block_size(t: &Mat, k: usize) -> usize {
    if k + 1 < t.nrows() && t[(k + 1, k)] != 0.0 {
        2
    } else {
        1
    }
}

fn block_eigen(t: &Mat, k: usize) -> (C64, Option<C64>) {
    if block_size(t, k) == 1 {
        return (C64::new(t[(k, k)], 0.0), None);
    }
    let (a, b, c, d) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
    let tr = 0.5 * (a + d);
    let disc = (0.5 * (a - d)) * (0.5 * (a - d)) + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (C64::new(tr + r, 0.0), Some(C64::new(tr - r, 0.0)))
    } else {
        let im = (-disc).sqrt();
        (C64::new(tr, im), Some(C64::new(tr, -im)))
    }
}

pub fn quasi_triangular_eigenvalues(t: &Mat) -> Vec<C64> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        let (e1, e2) = block_eigen(t, k);
        out.push(e1);
        if let Some(e2) = e2 {
            out.push(e2);
            k += 2;
        } else {
            k += 1;
        }
    }
    out
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(a: &Mat) -> Result<Vec<C64>> {
    Ok(real_schur(a)?.eigenvalues())
}

/// Householder QR of a tall `m×q` matrix; returns the full orthogonal `Q`.
/// Householder QR with the full square orthogonal factor: `b = Q R`.
pub fn full_qr(b: &Mat) -> (Mat, Mat) {
    let m = b.nrows();
    let mut r = b.clone();
    let mut q = Mat::identity(m, m);
    for k in 0..b.ncols().min(m) {
        let x: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let (v, beta) = house(&x);
        let nc = r.ncols();
        apply_left(&mut r, k, k, nc, &v, beta);
        apply_right(&mut q, 0, m, k, &v, beta);
    }
    (q, r)
}

/// Swaps the adjacent diagonal blocks of sizes `p` (at `j`) and `q`
/// (at `j + p`) by an orthogonal similarity.
fn swap_blocks(t: &mut Mat, z: &mut Mat, j: usize, p: usize, q: usize) -> Result<()> {
    let n = t.nrows();
    let a11 = t.view((j, j), (p, p)).into_owned();
    let a12 = t.view((j, j + p), (p, q)).into_owned();
    let a22 = t.view((j + p, j + p), (q, q)).into_owned();
    // A11 X - X A22 = A12 through the Kronecker form, column-major vec.
    let dim = p * q;
    let mut kron = Mat::zeros(dim, dim);
    for c in 0..q {
        for r in 0..p {
            let row = c * p + r;
            for k in 0..p {
                kron[(row, c * p + k)] += a11[(r, k)];
            }
            for k in 0..q {
                kron[(row, k * p + r)] -= a22[(k, c)];
            }
        }
    }
    let rhs = Mat::from_iterator(dim, 1, a12.iter().copied());
    let sol = kron
        .full_piv_lu()
        .solve(&rhs)
        .filter(super::is_finite)
        .ok_or(Error::ReorderFailed { residual: f64::INFINITY })?;
    let x = Mat::from_iterator(p, q, sol.iter().copied());
    let mut basis = Mat::zeros(p + q, q);
    basis.view_mut((0, 0), (p, q)).copy_from(&(-&x));
    basis.view_mut((p, 0), (q, q)).fill_with_identity();
    let (qm, _) = full_qr(&basis);
    let m = p + q;
    // T[j.., :] ← Qᵀ T[j.., :];  T[:, j..] ← T[:, j..] Q;  Z ← Z Q
    let rows = t.view((j, 0), (m, n)).into_owned();
    t.view_mut((j, 0), (m, n)).copy_from(&(qm.transpose() * rows));
    let cols = t.view((0, j), (n, m)).into_owned();
    t.view_mut((0, j), (n, m)).copy_from(&(cols * &qm));
    let zc = z.view((0, j), (n, m)).into_owned();
    z.view_mut((0, j), (n, m)).copy_from(&(zc * &qm));

    let scale = super::max_abs(&t.view((j, j), (m, m)).into_owned()).max(f64::MIN_POSITIVE);
    let mut residual = 0.0f64;
    for r in j + q..j + m {
        for c in j..j + q {
            residual = residual.max(t[(r, c)].abs());
            t[(r, c)] = 0.0;
        }
    }
    if residual > 1e-8 * scale {
        return Err(Error::ReorderFailed { residual });
    }
    if q == 2 {
        standardize_block(t, z, j);
    } else if q == 1 && j + 1 < n && p == 2 {
        t[(j + 1, j)] = 0.0;
    }
    if p == 2 {
        standardize_block(t, z, j + q);
    }
    Ok(())
}

/// Reorders the Schur form so that every eigenvalue for which `select`
/// holds comes first. Returns how many eigenvalues were selected. Complex
/// pairs are judged by the eigenvalue with positive imaginary part.
pub fn reorder_schur(schur: &mut RealSchur, select: impl Fn(C64) -> bool) -> Result<usize> {
    let RealSchur { t, z } = schur;
    let n = t.nrows();
    let mut ks = 0;
    let mut k = 0;
    while k < n {
        let bs = block_size(t, k);
        let (lambda, _) = block_eigen(t, k);
        if select(lambda) {
            let mut here = k;
            let mut cur = bs;
            while here > ks {
                let prev_size = if here >= 2 && t[(here - 1, here - 2)] != 0.0 { 2 } else { 1 };
                let prev = here - prev_size;
                swap_blocks(t, z, prev, prev_size, cur)?;
                here = prev;
                cur = block_size(t, here);
                if cur != bs {
                    // a 2×2 block split into two real eigenvalues
                    cur = bs;
                }
            }
            ks += bs;
        }
        k += bs;
    }
    Ok(ks)
}
