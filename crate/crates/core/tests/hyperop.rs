mod common;

use std::num::NonZeroUsize;

use common::rng;
use gauss_quad::GaussLegendre;
use hyperop_core::ensemble::{random_hermitian, random_with_spectrum_in};
use hyperop_core::hyperop::{
    alpha_estimate, alpha_verdict, d_log, inequality_check, quantum_derivative, quantum_derivative_apply,
    series_derivative_terms, DividedDifferenceKernel,
};
use hyperop_core::{gateaux_fd, operator_norm, spectral_decompose, Operator, ScalarFunction};
use proptest::prelude::*;

fn functions() -> [ScalarFunction; 3] {
    [ScalarFunction::exp_neg(), ScalarFunction::inverse(), ScalarFunction::log()]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn leibniz_consistency(seed in any::<u64>(), dim in 2usize..7) {
        let mut r = rng(seed);
        let a = random_with_spectrum_in(&mut r, dim, 0.5, 5.0);
        let b = random_hermitian(&mut r, dim, 1.0);
        let comm = a.commutator(&b);
        for f in functions() {
            let fa = spectral_decompose(&a).unwrap().apply(&f).unwrap();
            let lhs = quantum_derivative_apply(&f, &a, &comm).unwrap();
            let rhs = fa.commutator(&b);
            prop_assert!(operator_norm(&(lhs - &rhs)) <= 1e-9 * operator_norm(&rhs).max(1e-300) + 1e-14);
        }
    }

    #[test]
    fn materialized_matches_kernel(seed in any::<u64>(), dim in 2usize..6) {
        let mut r = rng(seed);
        let a = random_with_spectrum_in(&mut r, dim, 0.5, 5.0);
        let b = random_hermitian(&mut r, dim, 1.0);
        for f in functions() {
            let h = quantum_derivative(&f, &a).unwrap().apply(&b).unwrap();
            let k = quantum_derivative_apply(&f, &a, &b).unwrap();
            prop_assert!(operator_norm(&(h - k)) < 1e-12);
        }
    }

    #[test]
    fn inequality_holds(seed in any::<u64>(), dim in 2usize..6, n in 1usize..=20) {
        let mut r = rng(seed);
        let a = random_with_spectrum_in(&mut r, dim, 0.5, 5.0);
        let b = random_hermitian(&mut r, dim, 1.0);
        let (lhs, rhs) = inequality_check(&a, &b, n).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "n = {n}: {lhs} > {rhs}");
    }
}

#[test]
fn finite_difference_error_is_quadratic() {
    let mut r = rng(11);
    let a = random_with_spectrum_in(&mut r, 4, 0.5, 5.0);
    let b = random_hermitian(&mut r, 4, 1.0);
    for f in functions() {
        let exact = quantum_derivative_apply(&f, &a, &b).unwrap();
        let err = |h: f64| operator_norm(&(gateaux_fd(&f, &a, &b, h).unwrap() - &exact));
        let c3 = err(1e-3) / 1e-6;
        let c2 = err(1e-2) / 1e-4;
        assert!((c3 / c2 - 1.0).abs() < 0.05, "{}: {c2} vs {c3}", f.name());
        // below h ~ 1e-4 rounding (~eps/h) takes over from the h^2 term
        for h in [1e-4, 1e-5, 1e-6] {
            assert!(err(h) <= c3 * h * h + 1e-13 / h, "{} h = {h}: {}", f.name(), err(h));
        }
    }
}

/// `int_0^inf (A + t)^{-1} B (A + t)^{-1} dt` by Gauss-Legendre on
/// logarithmic panels, plus the leading tail `B / T`.
fn log_derivative_quadrature(a: &Operator, b: &Operator) -> Operator {
    let rule = GaussLegendre::new(NonZeroUsize::new(24).unwrap());
    let resolvent = |t: f64| {
        let m = (a + Operator::identity(a.dim()).scale_real(t)).matrix().clone().try_inverse().unwrap();
        Operator::new(m).unwrap()
    };
    let mut edges = vec![0.0];
    let mut x = 1e-2;
    while x <= 1e9 {
        edges.push(x);
        x *= 2.0;
    }
    let mut sum = Operator::zeros(a.dim());
    for w in edges.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        for (node, weight) in rule.as_node_weight_pairs() {
            let t = w[0] + half * (node + 1.0);
            let r = resolvent(t);
            sum += &(&r * b * &r).scale_real(half * weight);
        }
    }
    let top = *edges.last().unwrap();
    sum + b.scale_real(1.0 / top)
}

#[test]
fn log_derivative_matches_resolvent_integral() {
    let mut r = rng(5);
    for dim in [2, 4] {
        let a = random_with_spectrum_in(&mut r, dim, 0.5, 5.0);
        let b = random_hermitian(&mut r, dim, 1.0);
        let kernel = d_log(&a, &b).unwrap();
        let quad = log_derivative_quadrature(&a, &b);
        assert!(operator_norm(&(kernel - quad)) < 1e-7);
    }
}

#[test]
fn delta_kernel_is_exprel_of_eigen_differences() {
    let a = Operator::from_real_diagonal(&[0.0, 1.0]);
    let s = spectral_decompose(&a).unwrap();
    let x = Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
    let out = DividedDifferenceKernel::delta(&s, 1.0).apply(&x).unwrap();
    // (e^{delta_A} - 1)/delta_A acts on |i><j| with lambda_i - lambda_j
    assert!((out.get(0, 1).re - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    assert!((out.get(1, 0).re - 1f64.exp_m1()).abs() < 1e-15);
}

#[test]
fn series_error_monotone_when_alpha_below_one() {
    let mut r = rng(23);
    for _ in 0..10 {
        let a = random_with_spectrum_in(&mut r, 4, 2.0, 3.0);
        let b = random_hermitian(&mut r, 4, 1.0);
        let verdict = alpha_verdict(&alpha_estimate(&a, &b, 30).unwrap());
        assert!(verdict < 1.0);
        let spread = spectral_decompose(&a).unwrap().spread();
        for f in [ScalarFunction::inverse(), ScalarFunction::log(), ScalarFunction::exp_neg()] {
            let exact = quantum_derivative_apply(&f, &a, &b).unwrap();
            let terms = series_derivative_terms(&f, &a, &b, 30).unwrap();
            let mut partial = Operator::zeros(4);
            let mut errors = Vec::new();
            for t in terms {
                partial += &t;
                errors.push(operator_norm(&(&partial - &exact)));
            }
            assert!(errors[30] < 1e-8, "{} {}", f.name(), errors[30]);
            let start = spread.ceil() as usize;
            for n in start..30 {
                assert!(errors[n + 1] <= errors[n] || errors[n + 1] < 1e-14, "{} n = {n}", f.name());
            }
        }
    }
}

#[test]
fn series_terms_grow_when_alpha_above_one() {
    let a = Operator::from_real_diagonal(&[1.0, 3.0]);
    let b = Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
    let verdict = alpha_verdict(&alpha_estimate(&a, &b, 30).unwrap());
    assert!(verdict > 1.0);
    let terms = series_derivative_terms(&ScalarFunction::inverse(), &a, &b, 30).unwrap();
    let norms: Vec<f64> = terms.iter().map(operator_norm).collect();
    assert!(norms[30] > norms[20] && norms[20] > norms[10]);
}
