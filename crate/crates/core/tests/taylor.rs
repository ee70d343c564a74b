mod common;

use std::num::NonZeroUsize;

use common::rng;
use gauss_quad::GaussLegendre;
use hyperop_core::ensemble::{random_hermitian, random_unitary, random_with_spectrum_in};
use hyperop_core::hyperop::quantum_derivative_apply;
use hyperop_core::taylor::{formula_a_d2, higher_derivative_apply, nonlinear_response_density, taylor_sum};
use hyperop_core::{c64, operator_norm, spectral_decompose, HigherDerivativeRequest, Operator, ScalarFunction, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn derivative(f: &ScalarFunction, a: &Operator, b: &Operator, n: usize) -> Operator {
    higher_derivative_apply(&HigherDerivativeRequest::new(f.clone(), a.clone(), b.clone(), n).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn unitary_covariance(seed in any::<u64>(), dim in 2usize..5, n in 1usize..5) {
        let mut r = rng(seed);
        let a = random_with_spectrum_in(&mut r, dim, 0.5, 5.0);
        let b = random_hermitian(&mut r, dim, 1.0);
        let u = random_unitary(&mut r, dim);
        for f in [ScalarFunction::exp_neg(), ScalarFunction::log()] {
            let plain = derivative(&f, &a, &b, n);
            let rotated = derivative(&f, &(&u * &a * u.adjoint()).hermitian_part(), &(&u * &b * u.adjoint()), n);
            let back = u.adjoint() * rotated * &u;
            prop_assert!(operator_norm(&(back - &plain)) <= 1e-9 * operator_norm(&plain).max(1.0));
        }
    }

    #[test]
    fn first_order_matches_kernel(seed in any::<u64>(), dim in 2usize..7) {
        let mut r = rng(seed);
        let a = random_with_spectrum_in(&mut r, dim, 0.5, 5.0);
        let b = random_hermitian(&mut r, dim, 1.0);
        for f in [ScalarFunction::exp_neg(), ScalarFunction::inverse(), ScalarFunction::log()] {
            let chain = derivative(&f, &a, &b, 1);
            let kernel = quantum_derivative_apply(&f, &a, &b).unwrap();
            prop_assert!(operator_norm(&(chain - kernel)) < 1e-12);
        }
    }
}

fn exact(f: &ScalarFunction, a: &Operator, b: &Operator, x: f64) -> Operator {
    spectral_decompose(&(a + b.scale_real(x)).hermitian_part()).unwrap().apply(f).unwrap()
}

#[test]
fn remainder_scaling() {
    let mut r = rng(3);
    let a = random_with_spectrum_in(&mut r, 4, 0.5, 2.0);
    let b = random_hermitian(&mut r, 4, 1.0);
    let f = ScalarFunction::exp_neg();
    for order in [2usize, 4, 6] {
        let err = |x: f64| operator_norm(&(taylor_sum(&f, &a, &b, x, order).unwrap() - exact(&f, &a, &b, x)));
        let x0 = 0.2;
        let ratio = err(x0) / err(x0 / 2.0);
        let expected = 2f64.powi(order as i32 + 1);
        assert!((ratio / expected - 1.0).abs() < 0.3, "N = {order}: ratio {ratio} vs {expected}");
    }
}

/// `2 int_0^1 dt1 int_0^{t1} dt2 f''(A - t1 delta_1 - t2 delta_2) : B^2` evaluated
/// entrywise in the eigenbasis by a product Gauss rule on the triangle.
fn simplex_second_derivative(f: &ScalarFunction, a: &Operator, b: &Operator) -> Operator {
    let s = spectral_decompose(a).unwrap();
    let l = s.eigenvalues().to_vec();
    let bt = s.to_eigenbasis(b);
    let d = l.len();
    let rule = GaussLegendre::new(NonZeroUsize::new(30).unwrap());
    let pairs = rule.as_node_weight_pairs();
    let weight = |i: usize, j: usize, k: usize| -> f64 {
        let mut total = 0.0;
        for &(u, wu) in pairs {
            let t1 = 0.5 * (u + 1.0);
            for &(v, wv) in pairs {
                let t2 = 0.5 * t1 * (v + 1.0);
                let arg = l[i] - t1 * (l[i] - l[j]) - t2 * (l[j] - l[k]);
                total += 0.25 * t1 * wu * wv * f.derivative(2, arg);
            }
        }
        2.0 * total
    };
    let m = DMatrix::from_fn(d, d, |i, k| (0..d).map(|j| bt[(i, j)] * bt[(j, k)] * weight(i, j, k)).sum::<C64>());
    s.from_eigenbasis(&m)
}

#[test]
fn second_derivative_matches_simplex_integral() {
    let mut r = rng(17);
    for f in [ScalarFunction::exp_neg(), ScalarFunction::inverse(), ScalarFunction::log()] {
        for _ in 0..5 {
            let a = random_with_spectrum_in(&mut r, 4, 0.5, 5.0);
            let b = random_hermitian(&mut r, 4, 1.0);
            let chain = derivative(&f, &a, &b, 2);
            let quad = simplex_second_derivative(&f, &a, &b);
            assert!(operator_norm(&(chain - quad)) < 1e-6, "{}", f.name());
        }
    }
}

#[test]
fn second_derivative_series_converges_to_chain_sum() {
    let mut r = rng(29);
    let a = random_with_spectrum_in(&mut r, 3, 1.0, 1.8);
    let b = random_hermitian(&mut r, 3, 1.0);
    let f = ScalarFunction::exp_neg();
    let chain = derivative(&f, &a, &b, 2);
    let series = formula_a_d2(&f, &a, &b, 40).unwrap();
    assert!(operator_norm(&(chain - series)) < 1e-10);
}

#[test]
fn nonlinear_response_matches_exact_boltzmann_factor() {
    let mut r = rng(31);
    let h = random_hermitian(&mut r, 4, 1.0);
    let q = random_hermitian(&mut r, 4, 1.0);
    let (beta, field) = (0.7, 0.05);
    let resp = nonlinear_response_density(&h, &q, beta, field, 6).unwrap();
    let target = spectral_decompose(&(&h - q.scale_real(field)).hermitian_part())
        .unwrap()
        .map(|x| c64((-beta * x).exp(), 0.0));
    assert!(operator_norm(&(resp.sum - target)) < 1e-9);
}
