//! Seeded random operators for property tests and the acceptance suite.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::operator::{c64, Operator, C64};
use crate::spectrum::spectral_decompose;

fn gaussian(rng: &mut impl Rng) -> C64 {
    c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Complex matrix with independent standard normal entries.
pub fn random_operator(rng: &mut impl Rng, dim: usize) -> Operator {
    let entries: Vec<C64> = (0..dim * dim).map(|_| gaussian(rng)).collect();
    Operator::from_fn(dim, |i, j| entries[i * dim + j])
}

/// Hermitian matrix rescaled to spectral norm `norm`.
pub fn random_hermitian(rng: &mut impl Rng, dim: usize, norm: f64) -> Operator {
    let h = random_operator(rng, dim).hermitian_part();
    let n = h.norm();
    if n == 0.0 {
        h
    } else {
        h.scale_real(norm / n)
    }
}

/// Haar-like unitary from the eigenbasis of a random Hermitian matrix.
pub fn random_unitary(rng: &mut impl Rng, dim: usize) -> Operator {
    let h = random_hermitian(rng, dim, 1.0);
    let s = spectral_decompose(&h).expect("random Hermitian matrices decompose");
    Operator::new(s.eigenvectors().clone()).expect("square")
}

/// Hermitian matrix with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_with_spectrum_in(rng: &mut impl Rng, dim: usize, lo: f64, hi: f64) -> Operator {
    let u = random_unitary(rng, dim);
    let diag: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..=hi)).collect();
    (&u * Operator::from_real_diagonal(&diag) * u.adjoint()).hermitian_part()
}

/// Positive definite density matrix of unit trace with eigenvalues at least `floor / dim`.
pub fn random_density(rng: &mut impl Rng, dim: usize, floor: f64) -> Operator {
    let u = random_unitary(rng, dim);
    let mut w: Vec<f64> = (0..dim).map(|_| floor + rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    (&u * Operator::from_real_diagonal(&w) * u.adjoint()).hermitian_part()
}
