mod common;

use common::{exp_taylor, rng};
use hyperop_core::ensemble::{random_hermitian, random_unitary};
use hyperop_core::{apply_scalar_function, operator_norm, spectral_decompose, Operator, QaError, ScalarFunction};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn reconstruction(seed in any::<u64>(), dim in 1usize..9, scale in 1e-3f64..1e3) {
        let a = random_hermitian(&mut rng(seed), dim, scale);
        let s = spectral_decompose(&a).unwrap();
        prop_assert!(operator_norm(&(s.reconstruct() - &a)) <= 1e-12 * a.norm().max(1.0));
        prop_assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn exp_neg_matches_taylor_oracle(seed in any::<u64>(), dim in 1usize..7, scale in 0.0f64..10.0) {
        let a = random_hermitian(&mut rng(seed), dim, scale);
        let s = spectral_decompose(&a).unwrap();
        let spectral = apply_scalar_function(&s, &ScalarFunction::exp_neg()).unwrap();
        let oracle = exp_taylor(&(-a));
        prop_assert!(operator_norm(&(spectral - &oracle)) <= 1e-10 * oracle.norm().max(1.0));
    }

    #[test]
    fn positivity_gate(seed in any::<u64>(), dim in 1usize..6, lo in -3.0f64..=0.0) {
        let mut r = rng(seed);
        let u = random_unitary(&mut r, dim);
        let diag: Vec<f64> = (0..dim).map(|k| if k == 0 { lo } else { lo + 1.0 + k as f64 }).collect();
        let a = (&u * Operator::from_real_diagonal(&diag) * u.adjoint()).hermitian_part();
        let s = spectral_decompose(&a).unwrap();
        for f in [ScalarFunction::inverse(), ScalarFunction::log()] {
            let out = apply_scalar_function(&s, &f);
            prop_assert!(matches!(out, Err(QaError::DomainViolation(_))), "{out:?}");
        }
    }
}

#[test]
fn non_hermitian_input_rejected() {
    let a = Operator::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
    assert!(matches!(spectral_decompose(&a), Err(QaError::NotHermitian { .. })));
}

#[test]
fn operator_json_round_trip() {
    let a = random_hermitian(&mut rng(7), 3, 2.0);
    let text = serde_json::to_string(&a).unwrap();
    let back: Operator = serde_json::from_str(&text).unwrap();
    assert_eq!(a, back);
}
