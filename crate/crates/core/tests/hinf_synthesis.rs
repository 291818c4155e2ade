use evtrig_core::augment::{build_p_add, build_p_mul};
use evtrig_core::hinf::{hinf_norm, hinf_opt_gamma, hinf_syn, Infeasibility, DEFAULT_NORM_REL_TOL};
use evtrig_core::linalg::{self, Mat};
use evtrig_core::statespace::{is_hurwitz, lft_lower, StateSpace};
use evtrig_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plant() -> (Mat, Mat, Mat) {
    (
        Mat::from_row_slice(2, 2, &[-12.5, 5.9, -7.1, 13.8]),
        Mat::from_row_slice(2, 1, &[1.0, 2.0]),
        Mat::from_row_slice(1, 2, &[-4.0, 5.5]),
    )
}

// Optimal levels of the unstable two-state plant, obtained independently by
// minimizing γ subject to the projected output-feedback LMIs with an
// interior-point SDP solver.
const LMI_GAMMA_ADD: f64 = 4.582629;
const LMI_GAMMA_MUL: f64 = 5.061285;

fn assert_verified(p: &StateSpace, nmeas: usize, nctrl: usize, k: &StateSpace, claimed: f64) {
    let cl = lft_lower(p, nmeas, nctrl, k).unwrap();
    assert!(is_hurwitz(&cl).unwrap());
    let norm = hinf_norm(&cl, DEFAULT_NORM_REL_TOL).unwrap().norm;
    assert_eq!(norm, claimed);
}

#[test]
fn additive_optimal_level_matches_lmi_oracle() {
    let (a, b, c) = plant();
    let pa = build_p_add(&a, &b, &c).unwrap();
    let opt = hinf_opt_gamma(&pa.p, pa.nmeas(), pa.nctrl(), 1e-4).unwrap();
    assert!((opt.gamma_opt - LMI_GAMMA_ADD).abs() < 1e-3 * LMI_GAMMA_ADD, "{}", opt.gamma_opt);
    let syn = &opt.synthesis;
    assert!(syn.feasible);
    let k = syn.controller.as_ref().unwrap();
    assert_eq!(k.states(), 2);
    let verified = syn.gamma_verified.unwrap();
    assert!(verified <= 1.001 * opt.gamma_opt);
    assert_verified(&pa.p, 1, 1, k, verified);
}

#[test]
fn multiplicative_optimal_level_matches_lmi_oracle() {
    let (a, b, c) = plant();
    let pm = build_p_mul(&a, &b, &c).unwrap();
    let opt = hinf_opt_gamma(&pm.p, pm.nmeas(), pm.nctrl(), 1e-4).unwrap();
    assert!((opt.gamma_opt - LMI_GAMMA_MUL).abs() < 1e-3 * LMI_GAMMA_MUL, "{}", opt.gamma_opt);
    assert!(opt.synthesis.feasible);
}

#[test]
fn bracket_around_optimum() {
    let (a, b, c) = plant();
    let pa = build_p_add(&a, &b, &c).unwrap();
    let g = hinf_opt_gamma(&pa.p, 1, 1, 1e-4).unwrap().gamma_opt;
    assert!(hinf_syn(&pa.p, 1, 1, 1.01 * g).unwrap().feasible);
    let below = hinf_syn(&pa.p, 1, 1, 0.99 * g).unwrap();
    assert!(!below.feasible);
    assert!(below.diagnostic.is_some());
    assert!(below.controller.is_none());
}

#[test]
fn low_level_is_infeasible_with_d11_diagnostic() {
    let (a, b, c) = plant();
    let pa = build_p_add(&a, &b, &c).unwrap();
    let r = hinf_syn(&pa.p, 1, 1, 0.2).unwrap();
    assert!(!r.feasible);
    assert!(matches!(r.diagnostic, Some(Infeasibility::D11Bound { .. })));
}

#[test]
fn feasibility_is_monotone() {
    let (a, b, c) = plant();
    let pa = build_p_add(&a, &b, &c).unwrap();
    for g in [4.6, 5.0, 8.0, 20.0] {
        assert!(hinf_syn(&pa.p, 1, 1, g).unwrap().feasible);
        assert!(hinf_syn(&pa.p, 1, 1, 2.0 * g).unwrap().feasible);
    }
}

fn random_regular_plant(rng: &mut ChaCha8Rng) -> StateSpace {
    // n = 2, w = 2, u = 1, z = 2, y = 1 with D12, D21 of full rank
    let r = |rng: &mut ChaCha8Rng, rows, cols| Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.5..1.5));
    let a = r(rng, 2, 2);
    let b = r(rng, 2, 3);
    let c = r(rng, 3, 2);
    let mut d = r(rng, 3, 3) * 0.3;
    d[(1, 2)] = 1.0 + rng.random_range(0.0..0.5);
    d[(2, 1)] = 1.0 + rng.random_range(0.0..0.5);
    d[(2, 2)] = 0.0;
    StateSpace::new(a, b, c, d).unwrap()
}

#[test]
fn random_plants_bracket_self_consistently() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 8 {
        let p = random_regular_plant(&mut rng);
        let Ok(opt) = hinf_opt_gamma(&p, 1, 1, 1e-4) else { continue };
        if opt.below_floor {
            continue;
        }
        let g = opt.gamma_opt;
        let hi = hinf_syn(&p, 1, 1, 1.01 * g).unwrap();
        assert!(hi.feasible, "plant {checked}: infeasible above optimum {g}");
        assert_verified(&p, 1, 1, hi.controller.as_ref().unwrap(), hi.gamma_verified.unwrap());
        assert!(!hinf_syn(&p, 1, 1, 0.99 * g).unwrap().feasible, "plant {checked}: feasible below {g}");
        checked += 1;
    }
}

#[test]
fn zero_coupling_plant() {
    // stable plant whose w → z map is identically zero
    let a = Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
    let b = linalg::hstack(&[&Mat::from_row_slice(2, 1, &[1.0, 0.0]), &Mat::from_row_slice(2, 1, &[0.0, 1.0])]);
    let c = linalg::vstack(&[&Mat::zeros(1, 2), &Mat::from_row_slice(1, 2, &[1.0, 1.0])]);
    let d = Mat::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    let p = StateSpace::new(a, b, c, d).unwrap();
    for g in [1e-3, 1.0, 1e3] {
        let r = hinf_syn(&p, 1, 1, g).unwrap();
        assert!(r.feasible);
        assert_eq!(r.gamma_verified, Some(0.0));
    }
    let opt = hinf_opt_gamma(&p, 1, 1, 1e-4).unwrap();
    assert_eq!(opt.gamma_opt, 0.0);
    assert!(opt.below_floor);
}

#[test]
fn structural_errors_name_the_block() {
    let (a, b, c) = plant();
    let pa = build_p_add(&a, &b, &c).unwrap();
    let (pa_a, pa_b, pa_c, mut pa_d) = pa.p.clone().into_parts();
    pa_d[(2, 3)] = 0.5;
    let with_d22 = StateSpace::new(pa_a.clone(), pa_b.clone(), pa_c.clone(), pa_d.clone()).unwrap();
    match hinf_syn(&with_d22, 1, 1, 10.0) {
        Err(Error::Structural(msg)) => assert!(msg.contains("D22")),
        other => panic!("{other:?}"),
    }
    pa_d[(2, 3)] = 0.0;
    pa_d[(1, 3)] = 0.0;
    let no_d12 = StateSpace::new(pa_a, pa_b, pa_c, pa_d).unwrap();
    match hinf_syn(&no_d12, 1, 1, 10.0) {
        Err(Error::Structural(msg)) => assert!(msg.contains("D12")),
        other => panic!("{other:?}"),
    }
}
