mod common;

use std::sync::Arc;

use common::reference::{disc_samples, mho_reference, relative_error, sinhc_reference, ups_reference};
use common::{generator, kernel, measure_with_generator_norm, random_cmat, random_measure, random_model, rel, rng};
use ndarray::{array, s, Array2};
use oqho_core::lie::scalar::{mho_scalar, sinhc_scalar, ups_scalar};
use oqho_core::lie::superop::{
    magnus_derivative_check, mho_superop, sinhc_superop, ups_superop, ups_superop_spectral_closed_form,
};
use oqho_core::lie::{bch_product, chk_exp, csk_log, CskMatrix};
use oqho_core::linalg::{commutator, expm, fro, identity, CMat, C64, I};
use oqho_core::measure::{bracket, lambda_product};
use oqho_core::model::damped_mode;
use oqho_core::{CcrKernel, Error, KernelMeasure, TimeGrid};
use proptest::prelude::*;

fn cx(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[test]
fn scalar_functions_match_double_double_series() {
    let samples = disc_samples(5.0, 10, 24);
    let (mut eu, mut em, mut es) = (0.0f64, 0.0f64, 0.0f64);
    for &z in &samples {
        eu = eu.max(relative_error(ups_scalar(z), ups_reference(z)));
        em = em.max(relative_error(mho_scalar(z).unwrap(), mho_reference(z)));
        es = es.max(relative_error(sinhc_scalar(z), sinhc_reference(z)));
    }
    assert!(eu <= 1e-13, "Υ max relative error {eu:.3e}");
    assert!(em <= 1e-13, "℧ max relative error {em:.3e}");
    assert!(es <= 1e-13, "sinhc max relative error {es:.3e}");
}

#[test]
fn scalar_identities_on_the_disc() {
    for z in disc_samples(5.0, 10, 24) {
        let u = ups_scalar(z);
        assert!((u * mho_scalar(z).unwrap() - 1.0).norm() <= 1e-12, "Υ℧ at {z}");
        let half = (z * 0.5).exp() * sinhc_scalar(z * 0.5);
        assert!((u - half).norm() <= 1e-13 * u.norm(), "Υ vs e^(z/2) sinhc(z/2) at {z}");
    }
}

#[test]
fn mho_leading_terms_and_pole_guard() {
    let z = C64::new(1e-4, 2e-4);
    let series = C64::new(1.0, 0.0) - z * 0.5 + z * z / 12.0;
    assert!((mho_scalar(z).unwrap() - series).norm() < 1e-15);
    assert!(matches!(mho_scalar(C64::new(0.0, 2.0 * std::f64::consts::PI)), Err(Error::SeriesBound { .. })));
    assert!(mho_scalar(C64::new(7.0, 0.0)).is_err());
}

/// `Υ(ad_x)(y)` through the augmented exponential `exp([[L, v], [0, 0]])`,
/// with `L = x⊗I − I⊗xᵀ` acting on the row-major vectorization `v` of `y`.
fn ups_superop_kron_oracle(x: &CMat, y: &CMat) -> CMat {
    let n = x.nrows();
    let eye = identity::<C64>(n);
    let mut aug = CMat::zeros((n * n + 1, n * n + 1));
    for (i, j) in (0..n).flat_map(|i| (0..n).map(move |j| (i, j))) {
        for (k, l) in (0..n).flat_map(|k| (0..n).map(move |l| (k, l))) {
            aug[[i * n + j, k * n + l]] = x[[i, k]] * eye[[j, l]] - eye[[i, k]] * x[[l, j]];
        }
        aug[[i * n + j, n * n]] = y[[i, j]];
    }
    let e = expm(&aug).unwrap();
    Array2::from_shape_fn((n, n), |(i, j)| e[[i * n + j, n * n]])
}

#[test]
fn superoperators_match_kronecker_oracle() {
    let mut r = rng(21);
    for _ in 0..10 {
        let x = random_cmat(2, 2, &mut r) * cx(1.5);
        let y = random_cmat(2, 2, &mut r);
        let oracle = ups_superop_kron_oracle(&x, &y);
        let q = ups_superop(&x, &y, 16).unwrap();
        assert!(rel(&q.value, &oracle) < 1e-12, "Υ quadrature vs oracle {:.3e}", rel(&q.value, &oracle));
        assert!(rel(&ups_superop_spectral_closed_form(&x, &y).unwrap(), &oracle) < 1e-11);
        let sinhc = (&oracle + &ups_superop_kron_oracle(&(-&x), &y)) * cx(0.5);
        assert!(rel(&sinhc_superop(&x, &y, 16).unwrap().value, &sinhc) < 1e-12);
    }
}

#[test]
fn superoperators_fix_commuting_arguments() {
    let mut r = rng(22);
    let x = random_cmat(3, 3, &mut r);
    let y = &x * cx(0.3) + &x.dot(&x) * cx(0.2);
    assert!(rel(&ups_superop(&x, &y, 16).unwrap().value, &y) < 1e-12);
    assert!(rel(&sinhc_superop(&x, &x, 16).unwrap().value, &x) < 1e-12);
    assert!(rel(&mho_superop(&(&x * cx(0.3)), &y, 20).unwrap().value, &y) < 1e-12);
}

#[test]
fn mho_second_order_form() {
    let mut r = rng(23);
    let x = random_cmat(3, 3, &mut r) * cx(0.2);
    let y = random_cmat(3, 3, &mut r);
    let xy = commutator(&x, &y);
    let expected = &y - &(&xy * cx(0.5)) + commutator(&x, &xy) * cx(1.0 / 12.0);
    assert!(rel(&mho_superop(&x, &y, 2).unwrap().value, &expected) < 1e-15);
    // b₃ = 0, so order 3 adds nothing
    assert!(rel(&mho_superop(&x, &y, 3).unwrap().value, &expected) < 1e-15);
    assert!(mho_superop(&x, &y, 0).is_err());
    assert!(matches!(mho_superop(&(&x * cx(100.0)), &y, 4), Err(Error::SeriesBound { .. })));
}

#[test]
fn mho_inverts_ups_for_small_arguments() {
    let mut r = rng(24);
    for scale in [0.05, 0.2, 0.5] {
        let x = random_cmat(3, 3, &mut r) * cx(scale);
        let y = random_cmat(3, 3, &mut r);
        let u = ups_superop(&x, &y, 16).unwrap().value;
        let back = mho_superop(&x, &u, 30).unwrap().value;
        assert!(rel(&back, &y) < 1e-9, "scale {scale}: {:.3e}", rel(&back, &y));
    }
}

#[test]
fn magnus_residuals_shrink_quadratically() {
    let mut r = rng(25);
    let (a, b) = (random_cmat(3, 3, &mut r) * cx(0.5), random_cmat(3, 3, &mut r) * cx(0.5));
    let path = |h: f64| -> Vec<CMat> { (0..5).map(|k| { let t = 0.3 + h * k as f64; &a * cx(t) + &b * cx(t * t) }).collect() };
    let coarse = magnus_derivative_check(&path(0.02), 0.02).unwrap();
    let fine = magnus_derivative_check(&path(0.01), 0.01).unwrap();
    for (c, f) in [(coarse.left_residual, fine.left_residual), (coarse.right_residual, fine.right_residual)] {
        let ratio = c / f;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
    let constant = vec![a.clone(); 4];
    let zero = magnus_derivative_check(&constant, 0.1).unwrap();
    assert_eq!(zero.left_residual, 0.0);
    assert_eq!(zero.right_residual, 0.0);
    // Φ = t·C: only the central difference of e^{tC} contributes
    let line = |h: f64| -> Vec<CMat> { (0..3).map(|k| &a * cx(h * k as f64)).collect() };
    let ratio = magnus_derivative_check(&line(0.02), 0.02).unwrap().left_residual
        / magnus_derivative_check(&line(0.01), 0.01).unwrap().left_residual;
    assert!((3.5..4.5).contains(&ratio), "commuting ratio {ratio}");
    assert!(magnus_derivative_check(&line(0.1)[..2], 0.1).is_err());
}

#[test]
fn exponential_of_zero_and_inverse_pairs() {
    let model = random_model(31, 2, 2);
    let ccr = kernel(&model, 1.0, 6);
    let zero = lambda_product(&ccr, &KernelMeasure::zero(*ccr.grid(), 2)).unwrap();
    let s = chk_exp(&zero, I * 4.0, &ccr).unwrap();
    assert!(rel(&s.mat(), &identity::<C64>(ccr.dim())) < 1e-16);
    assert!(fro(&csk_log(&CskMatrix::identity(ccr.clone()), None).unwrap().ham()) < 1e-14);
    let q = measure_with_generator_norm(&ccr, 4, 2.0, &mut rng(32));
    let h = lambda_product(&ccr, &q).unwrap();
    let prod = chk_exp(&h, I * 4.0, &ccr).unwrap().mul(&chk_exp(&h, I * -4.0, &ccr).unwrap());
    assert!(fro(&(prod.mat() - identity::<C64>(ccr.dim()))) < 1e-11);
}

#[test]
fn exponential_safety_bound_is_enforced() {
    let model = random_model(33, 2, 2);
    let ccr = kernel(&model, 1.0, 3);
    let q = measure_with_generator_norm(&ccr, 3, 400.0, &mut rng(34));
    let err = chk_exp(&lambda_product(&ccr, &q).unwrap(), I * 4.0, &ccr).unwrap_err();
    assert!(matches!(err, Error::ExponentialOverflow { .. }), "{err}");
}

#[test]
fn rotation_by_pi_without_anchor_is_ambiguous() {
    let model = damped_mode(0.5, 0.7).unwrap();
    let ccr = Arc::new(CcrKernel::build(&model, TimeGrid::single_time()));
    // real 2×2 rotations have unit determinant and so preserve Θ = J;
    // the angle sits inside the branch-cut tolerance but keeps distinct eigenvalues
    let phi = std::f64::consts::PI - 1e-9;
    let rot = array![[phi.cos(), phi.sin()], [-phi.sin(), phi.cos()]].mapv(cx);
    let s = CskMatrix::from_dense(ccr.clone(), &rot).unwrap();
    assert!(s.symplectic_residual() < 1e-15);
    assert!(matches!(csk_log(&s, None), Err(Error::BranchAmbiguity { .. })));
    let near = array![[0.0, 3.1], [-3.1, 0.0]].mapv(cx);
    let anchor = oqho_core::ChkMatrix::from_dense(*ccr.grid(), 2, &near).unwrap();
    let h = csk_log(&s, Some(&anchor)).unwrap();
    assert!(rel(&expm(&h.ham()).unwrap(), &rot) < 1e-12);
}

#[test]
fn bch_of_commuting_pairs_adds() {
    let model = random_model(35, 2, 2);
    let ccr = kernel(&model, 1.0, 4);
    let q = measure_with_generator_norm(&ccr, 3, 0.8, &mut rng(36));
    let zero = KernelMeasure::zero(*ccr.grid(), 2);
    assert!(rel(&bch_product(&q, &zero, &ccr).unwrap().weights(), &q.weights()) < 1e-10);
    let sum = bch_product(&q, &q.scale(cx(0.4)), &ccr).unwrap();
    assert!(rel(&sum.weights(), &(q.weights() * cx(1.4))) < 1e-10);
}

#[test]
fn bch_matches_the_bracket_to_second_order() {
    let model = random_model(37, 2, 2);
    let ccr = kernel(&model, 1.0, 4);
    let mut r = rng(38);
    let q1 = measure_with_generator_norm(&ccr, 4, 1.0, &mut r);
    let q2 = measure_with_generator_norm(&ccr, 2, 1.0, &mut r);
    let br = bracket(&q1, &q2, &ccr).unwrap().weights();
    let remainder = |eps: f64| {
        let b = bch_product(&q1.scale(cx(eps)), &q2.scale(cx(eps)), &ccr).unwrap().weights();
        let lin = (q1.weights() + q2.weights()) * cx(eps);
        fro(&(b - lin - &br * cx(0.5 * eps * eps)))
    };
    let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&e| remainder(e)).collect();
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((6.5..9.5).contains(&ratio), "third-order ratio {ratio}, errors {errs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(24) })]

    #[test]
    fn exponentials_of_symmetric_measures_are_symplectic(seed in any::<u64>(), target in 0.1f64..5.0, half_n in 1usize..3) {
        let model = random_model(seed, 2 * half_n, 2);
        let ccr = kernel(&model, 1.0, 4);
        let mut r = rng(seed ^ 7);
        let support = rand::Rng::random_range(&mut r, 0..=4);
        let q = measure_with_generator_norm(&ccr, support, target, &mut r);
        let s = chk_exp(&lambda_product(&ccr, &q).unwrap(), I * 4.0, &ccr).unwrap();
        let lam = ccr.big();
        prop_assert!(s.symplectic_residual() <= 1e-10 * (1.0 + fro(lam)));

        let other = measure_with_generator_norm(&ccr, 4, 1.0, &mut r);
        let t = chk_exp(&lambda_product(&ccr, &other).unwrap(), I * 4.0, &ccr).unwrap();
        prop_assert!(s.mul(&t).symplectic_residual() <= 1e-10 * (1.0 + fro(lam)));
        // identity beyond the support columns
        let l = ccr.n() * (support + 1);
        let tail = s.mat().slice(s![.., l..]).to_owned();
        let eye = identity::<C64>(ccr.dim()).slice(s![.., l..]).to_owned();
        prop_assert_eq!(tail, eye);
    }

    #[test]
    fn logarithm_inverts_the_exponential(seed in any::<u64>(), target in 0.05f64..1.0) {
        let model = random_model(seed, 2, 2);
        let ccr = kernel(&model, 1.0, 5);
        let q = measure_with_generator_norm(&ccr, 5, target, &mut rng(seed));
        let h = lambda_product(&ccr, &q).unwrap().scale(I * 4.0);
        let back = csk_log(&chk_exp(&h, cx(1.0), &ccr).unwrap(), None).unwrap();
        prop_assert!(fro(&(back.ham() - h.ham())) <= 1e-10);
    }

    #[test]
    fn bch_reproduces_the_product(seed in any::<u64>(), t1 in 0.05f64..1.0, t2 in 0.05f64..1.0) {
        let model = random_model(seed, 2, 2);
        let ccr = kernel(&model, 1.0, 4);
        let mut r = rng(seed.rotate_left(9));
        let q1 = measure_with_generator_norm(&ccr, 4, t1, &mut r);
        let q2 = measure_with_generator_norm(&ccr, 3, t2, &mut r);
        let q = bch_product(&q1, &q2, &ccr).unwrap();
        let lhs = expm(&generator(&ccr, &q)).unwrap();
        let rhs = expm(&generator(&ccr, &q1)).unwrap().dot(&expm(&generator(&ccr, &q2)).unwrap());
        prop_assert!(rel(&lhs, &rhs) <= 1e-8);
    }

    #[test]
    fn measure_recovery_roundtrip(seed in any::<u64>()) {
        let model = random_model(seed, 2, 2);
        let ccr = kernel(&model, 1.0, 4);
        let q = random_measure(&ccr, 4, &mut rng(seed));
        let h = lambda_product(&ccr, &q).unwrap();
        let solved = oqho_core::lie::solve_measure_from_chk(&h, &ccr).unwrap();
        prop_assert!(rel(&solved.measure.weights(), &q.weights()) <= 1e-9 * solved.condition.max(1.0));
    }
}
