//! Generalized plants whose lower LFT with a controller `K` is the map from
//! sampling errors and uncertainty signals to the sampled signals, and the
//! explicit closed-loop realizations of those maps.
//!
//! Additive: `w = (ε_y, ε_u, d)`, `z = (ŷ, û)`.
//! Multiplicative: `w = (d, ε_y, ε_u)`, `z = (λ, ŷ, û)`.
//! Closed-loop states are ordered plant first, controller second.

use alloc::format;

use crate::linalg::{block, eye, hstack, mul, mul3, vstack, zeros, Mat};
use crate::statespace::StateSpace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPlant {
    pub p: StateSpace,
    pub kind: Kind,
    pub w_width: usize,
    pub u_width: usize,
    pub z_width: usize,
    pub y_width: usize,
}

impl AugmentedPlant {
    pub fn nmeas(&self) -> usize {
        self.y_width
    }
    pub fn nctrl(&self) -> usize {
        self.u_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRealization {
    pub m: StateSpace,
    pub kind: Kind,
}

fn dims(a: &Mat, b: &Mat, c: &Mat) -> Result<(usize, usize, usize)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "plant matrices A {:?}, B {:?}, C {:?} are inconsistent",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    Ok((n, b.ncols(), c.nrows()))
}

fn check_controller(k: &StateSpace, m: usize, p: usize) -> Result<()> {
    if k.inputs() != p || k.outputs() != m {
        return Err(Error::Dimension(format!(
            "controller is {}x{}, plant needs {m}x{p}",
            k.outputs(),
            k.inputs()
        )));
    }
    Ok(())
}

pub fn build_p_add(a: &Mat, b: &Mat, c: &Mat) -> Result<AugmentedPlant> {
    let (n, m, p) = dims(a, b, c)?;
    let b1 = hstack(&[&zeros(n, p), b, &zeros(n, p)]);
    let c1 = vstack(&[c, &zeros(m, n)]);
    let d11 = block(&[&[&eye(p), &zeros(p, m), &eye(p)], &[&zeros(m, p), &eye(m), &zeros(m, p)]]);
    let d12 = vstack(&[&zeros(p, m), &eye(m)]);
    let d21 = hstack(&[&eye(p), &zeros(p, m), &eye(p)]);
    let plant = StateSpace::new(
        a.clone(),
        hstack(&[&b1, b]),
        vstack(&[&c1, c]),
        block(&[&[&d11, &d12], &[&d21, &zeros(p, m)]]),
    )?;
    Ok(AugmentedPlant { p: plant, kind: Kind::Additive, w_width: 2 * p + m, u_width: m, z_width: p + m, y_width: p })
}

pub fn build_p_mul(a: &Mat, b: &Mat, c: &Mat) -> Result<AugmentedPlant> {
    let (n, m, p) = dims(a, b, c)?;
    let b1 = hstack(&[&zeros(n, p), &zeros(n, p), b]);
    let c1 = vstack(&[c, c, &zeros(m, n)]);
    let d11 = block(&[
        &[&zeros(p, p), &zeros(p, p), &zeros(p, m)],
        &[&eye(p), &eye(p), &zeros(p, m)],
        &[&zeros(m, p), &zeros(m, p), &zeros(m, m)],
    ]);
    let d12 = vstack(&[&zeros(p, m), &zeros(p, m), &eye(m)]);
    let d21 = hstack(&[&eye(p), &eye(p), &zeros(p, m)]);
    let plant = StateSpace::new(
        a.clone(),
        hstack(&[&b1, b]),
        vstack(&[&c1, c]),
        block(&[&[&d11, &d12], &[&d21, &zeros(p, m)]]),
    )?;
    Ok(AugmentedPlant {
        p: plant,
        kind: Kind::Multiplicative,
        w_width: 2 * p + m,
        u_width: m,
        z_width: 2 * p + m,
        y_width: p,
    })
}

/// `M(s)`: `(ε_y, ε_u, d) ↦ (ŷ, û)` under controller `K`.
pub fn closed_loop_m(a: &Mat, b: &Mat, c: &Mat, k: &StateSpace) -> Result<ClosedLoopRealization> {
    let (n, m, p) = dims(a, b, c)?;
    check_controller(k, m, p)?;
    let (ak, bk, ck, dk) = (k.a(), k.b(), k.c(), k.d());
    let nk = k.states();
    let bdk = mul(b, dk);
    let a_cl = block(&[&[&(a + mul3(b, dk, c)), &mul(b, ck)], &[&mul(bk, c), ak]]);
    let b_cl = block(&[&[&bdk, b, &bdk], &[bk, &zeros(nk, m), bk]]);
    let c_cl = block(&[&[c, &zeros(p, nk)], &[&mul(dk, c), ck]]);
    let d_cl = block(&[&[&eye(p), &zeros(p, m), &eye(p)], &[dk, &eye(m), dk]]);
    debug_assert_eq!(a_cl.nrows(), n + nk);
    Ok(ClosedLoopRealization { m: StateSpace::new(a_cl, b_cl, c_cl, d_cl)?, kind: Kind::Additive })
}

/// `M̂(s)`: `(d, ε_y, ε_u) ↦ (λ, ŷ, û)` under controller `K`.
pub fn closed_loop_mhat(a: &Mat, b: &Mat, c: &Mat, k: &StateSpace) -> Result<ClosedLoopRealization> {
    let (_, m, p) = dims(a, b, c)?;
    check_controller(k, m, p)?;
    let (ak, bk, ck, dk) = (k.a(), k.b(), k.c(), k.d());
    let nk = k.states();
    let bdk = mul(b, dk);
    let a_cl = block(&[&[&(a + mul3(b, dk, c)), &mul(b, ck)], &[&mul(bk, c), ak]]);
    let b_cl = block(&[&[&bdk, &bdk, b], &[bk, bk, &zeros(nk, m)]]);
    let c_cl = block(&[&[c, &zeros(p, nk)], &[c, &zeros(p, nk)], &[&mul(dk, c), ck]]);
    let d_cl = block(&[
        &[&zeros(p, p), &zeros(p, p), &zeros(p, m)],
        &[&eye(p), &eye(p), &zeros(p, m)],
        &[dk, dk, &zeros(m, m)],
    ]);
    Ok(ClosedLoopRealization { m: StateSpace::new(a_cl, b_cl, c_cl, d_cl)?, kind: Kind::Multiplicative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::lft_lower;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
    }

    fn random_controller(nk: usize, m: usize, p: usize, rng: &mut ChaCha8Rng) -> StateSpace {
        StateSpace::new(random(nk, nk, rng), random(nk, p, rng), random(m, nk, rng), random(m, p, rng)).unwrap()
    }

    #[test]
    fn single_channel_dimensions() {
        let a = Mat::from_element(1, 1, -1.0);
        let b = Mat::from_element(1, 1, 1.0);
        let c = Mat::from_element(1, 1, 1.0);
        let pa = build_p_add(&a, &b, &c).unwrap();
        assert_eq!((pa.p.inputs(), pa.p.outputs()), (4, 3));
        let pm = build_p_mul(&a, &b, &c).unwrap();
        assert_eq!((pm.p.inputs(), pm.p.outputs()), (4, 4));
    }

    #[test]
    fn zero_controller_closed_loop() {
        let a = Mat::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let k = StateSpace::gain(zeros(1, 1)).unwrap();
        let m = closed_loop_m(&a, &b, &c, &k).unwrap().m;
        assert_eq!(m.a(), &a);
        assert_eq!(m.c(), &Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(m.d(), &Mat::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn lft_matches_explicit_realizations_for_random_controllers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, m, p) = (2, 1, 1);
        let a = random(n, n, &mut rng);
        let b = random(n, m, &mut rng);
        let c = random(p, n, &mut rng);
        let pa = build_p_add(&a, &b, &c).unwrap();
        let pm = build_p_mul(&a, &b, &c).unwrap();
        for _ in 0..20 {
            let k = random_controller(n, m, p, &mut rng);
            assert_eq!(lft_lower(&pa.p, p, m, &k).unwrap(), closed_loop_m(&a, &b, &c, &k).unwrap().m);
            assert_eq!(lft_lower(&pm.p, p, m, &k).unwrap(), closed_loop_mhat(&a, &b, &c, &k).unwrap().m);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn widths_and_equivalence_over_dimensions(
            seed in 0u64..100_000, n in 1usize..6, m in 1usize..6, p in 1usize..6, nk in 0usize..6,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(n, n, &mut rng);
            let b = random(n, m, &mut rng);
            let c = random(p, n, &mut rng);
            let pa = build_p_add(&a, &b, &c).unwrap();
            prop_assert_eq!(pa.p.inputs(), 2 * p + 2 * m);
            prop_assert_eq!(pa.p.outputs(), 2 * p + m);
            prop_assert_eq!((pa.w_width, pa.z_width), (2 * p + m, p + m));
            let pm = build_p_mul(&a, &b, &c).unwrap();
            prop_assert_eq!(pm.p.inputs(), 2 * p + 2 * m);
            prop_assert_eq!(pm.p.outputs(), 3 * p + m);
            prop_assert_eq!((pm.w_width, pm.z_width), (2 * p + m, 2 * p + m));

            let k = random_controller(nk, m, p, &mut rng);
            let cl = lft_lower(&pa.p, p, m, &k).unwrap();
            prop_assert_eq!(cl.states(), n + nk);
            prop_assert_eq!(&cl, &closed_loop_m(&a, &b, &c, &k).unwrap().m);
            prop_assert_eq!(&lft_lower(&pm.p, p, m, &k).unwrap(), &closed_loop_mhat(&a, &b, &c, &k).unwrap().m);
        }
    }
}
