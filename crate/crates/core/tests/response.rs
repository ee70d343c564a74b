mod common;

use common::{pauli, rng};
use hyperop_core::ensemble::random_hermitian;
use hyperop_core::nonequilibrium::{thermal_state, von_neumann_evolve, SeriesQuadrature};
use hyperop_core::response::{
    canonical_correlation, conductivity, conductivity_large_omega, conductivity_series, conductivity_time_integral,
    current_spread, ergodic_decomposition, kubo_prediction, linear_response_average, sigma0_divergence_scan,
    TimeQuadrature,
};
use hyperop_core::{build_model, ForceProtocol, ModelSpec, Operator, ResponseSetup, StepControl, TimeGrid, Waveform};
use proptest::prelude::*;

fn random_setup(seed: u64, dim: usize, eps: f64) -> ResponseSetup {
    let mut r = rng(seed);
    let h = random_hermitian(&mut r, dim, 2.0);
    let j = random_hermitian(&mut r, dim, 1.0);
    ResponseSetup::new(&h, &j, 0.9, eps, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn correlation_conjugate_symmetry(seed in any::<u64>(), dim in 2usize..6, t in -20.0f64..20.0) {
        let s = random_setup(seed, dim, 0.1);
        let a = canonical_correlation(&s, t);
        let b = canonical_correlation(&s, -t);
        prop_assert!((a - b.conj()).norm() < 1e-10);
    }

    #[test]
    fn dissipative_part_is_non_negative(seed in any::<u64>(), dim in 2usize..6, omega in -10.0f64..10.0) {
        let s = random_setup(seed, dim, 0.05);
        prop_assert!(conductivity(&s, omega).sigma.re >= -1e-10);
    }
}

#[test]
fn resolvent_matches_time_quadrature_on_fifty_points() {
    let s = random_setup(1, 4, 0.1);
    let q = TimeQuadrature::default();
    for k in 0..50 {
        let omega = -5.0 + 10.0 * k as f64 / 49.0;
        let a = conductivity(&s, omega).sigma;
        let b = conductivity_time_integral(&s, omega, &q).unwrap().sigma;
        assert!((a - b).norm() < 1e-6, "omega = {omega}: {a} vs {b}");
    }
}

#[test]
fn large_frequency_tail_is_second_order() {
    let s = random_setup(2, 4, 0.01);
    let gap = |omega: f64| (conductivity(&s, omega).sigma - conductivity_large_omega(&s, omega).sigma).norm();
    // the 1/omega^2 coefficient is the odd first moment of the current
    // spectrum, which cancels, leaving eps/omega^2 that takes over only at
    // large omega
    for omega in [40.0, 80.0] {
        let ratio = gap(omega) / gap(2.0 * omega);
        assert!(ratio > 3.6, "omega = {omega}: ratio {ratio}");
    }
    let ratio = gap(1e5) / gap(2e5);
    assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn series_matches_resolvent_far_above_spectrum() {
    let s = random_setup(3, 4, 0.05);
    let omega = 10.0 * current_spread(&s) / s.hbar();
    let exact = conductivity(&s, omega).sigma;
    let series = conductivity_series(&s, omega, 30).unwrap().sigma;
    assert!((exact - series).norm() < 1e-8);
}

#[test]
fn drude_scaling_for_conserved_current() {
    let h = Operator::from_real_diagonal(&[0.0, 0.4, 1.1, 2.0]);
    let j = Operator::from_real_diagonal(&[0.3, -1.0, 0.8, 0.1]);
    let products: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| conductivity(&ResponseSetup::new(&h, &j, 1.3, eps, 1.0).unwrap(), 0.0).sigma.re * eps)
        .collect();
    for p in &products {
        assert!((p - products[0]).abs() < 1e-8 * products[0]);
    }
}

#[test]
fn drude_weight_from_conserved_quantities() {
    let model = build_model(&ModelSpec::xx_chain(2, 1.0, 0.0)).unwrap();
    let h = &model.hamiltonian;
    let sz = model.observable("sz_total").unwrap();
    let current = model.observable("current_0").unwrap();
    let j = sz.scale_real(0.4) + h.scale_real(0.3) + current.scale_real(0.5);
    let setup = ResponseSetup::new(h, &j, 1.0, 0.1, 1.0).unwrap();
    let dec = ergodic_decomposition(&setup, &[h.clone(), sz.clone()]).unwrap();
    assert!((dec.coefficients[0] - 0.3).abs() < 1e-10 && (dec.coefficients[1] - 0.4).abs() < 1e-10);
    let scan = sigma0_divergence_scan(&setup, &[1e-1, 1e-2, 1e-3]).unwrap();
    let weight = dec.drude_weight(1.0);
    assert!((scan.slope - weight).abs() < 1e-4, "{} vs {weight}", scan.slope);

    let off = ResponseSetup::new(h, current, 1.0, 0.1, 1.0).unwrap();
    let scan = sigma0_divergence_scan(&off, &[1e-1, 1e-2, 1e-3]).unwrap();
    assert!(scan.slope.abs() < 1e-4);
}

fn driven_two_spin(amplitude: f64) -> (ResponseSetup, ForceProtocol) {
    let model = build_model(&ModelSpec::xx_chain(2, 1.0, 0.0)).unwrap();
    let a = model.observable("sz_0").unwrap();
    let eps = 0.05;
    let setup = ResponseSetup::from_displacement(&model.hamiltonian, a, 1.0, eps, 1.0).unwrap();
    let p = ForceProtocol::with_default_start(amplitude, Waveform::Cosine { omega: 1.0 }, eps).unwrap();
    (setup, p)
}

#[test]
fn linear_response_matches_kubo_formula() {
    let (setup, p) = driven_two_spin(1e-3);
    let q = SeriesQuadrature::default();
    for t in [0.0, 0.7] {
        let direct = linear_response_average(&setup, &p, t, &q).unwrap();
        let kubo = kubo_prediction(&setup, p.amplitude(), 1.0, t);
        assert!((direct - kubo).abs() <= 1e-6 * kubo.abs().max(1e-12), "t = {t}: {direct} vs {kubo}");
    }
}

fn full_average(setup: &ResponseSetup, p: &ForceProtocol) -> f64 {
    let a = setup.displacement().unwrap();
    let ham = p.hamiltonian(setup.hamiltonian(), a, 0.0);
    let rho0 = thermal_state(setup.hamiltonian(), setup.beta()).unwrap();
    let grid = TimeGrid::new(p.t_start(), 0.0, 0.5).unwrap();
    let control = StepControl { rtol: 1e-12, max_halvings: 10, initial_substeps: 2 };
    let evo = von_neumann_evolve(&ham, &rho0, &grid, 1.0, &control).unwrap();
    (evo.states.last().unwrap() * setup.current()).trace().re
}

#[test]
fn linear_response_matches_full_evolution_to_second_order() {
    let q = SeriesQuadrature::default();
    let mut gaps = Vec::new();
    for amp in [2e-3, 1e-3] {
        let (setup, p) = driven_two_spin(amp);
        let lin = linear_response_average(&setup, &p, 0.0, &q).unwrap();
        let full = full_average(&setup, &p);
        println!("F = {amp}: linear {lin:.6e} full {full:.6e}");
        gaps.push((full - lin).abs());
    }
    assert!(gaps[1] < 1e-4 * 1e-3, "{gaps:?}");
    assert!(gaps[0] / gaps[1] > 3.0, "{gaps:?}");
}

#[test]
fn decomposition_rejects_non_orthogonal_constants() {
    let h = Operator::from_real_diagonal(&[0.0, 1.0, 2.0]);
    let c = Operator::from_real_diagonal(&[1.0, 0.0, 0.0]);
    let setup = ResponseSetup::new(&h, &h, 1.0, 0.1, 1.0).unwrap();
    assert!(ergodic_decomposition(&setup, &[h.clone(), c]).is_err());
    assert!(ergodic_decomposition(&setup, &[pauli(1)]).is_err());
}
