//! Shared fixtures for the benchmarks.

use hyperop_core::ensemble::{random_density, random_hermitian, random_operator, random_with_spectrum_in};
use hyperop_core::{DissipativeModel, Operator};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive `A` with spectrum in `[0.5, 5]` and a unit-norm Hermitian direction `B`.
pub fn positive_pair(dim: usize, seed: u64) -> (Operator, Operator) {
    let mut r = rng(seed);
    let a = random_with_spectrum_in(&mut r, dim, 0.5, 5.0);
    let b = random_hermitian(&mut r, dim, 1.0);
    (a, b)
}

/// Random damped model with `||Lambda|| = 0.5` and a positive initial state.
pub fn damped_model(dim: usize, seed: u64) -> (DissipativeModel, Operator) {
    let mut r = rng(seed);
    let h = random_hermitian(&mut r, dim, 2.0);
    let raw = random_operator(&mut r, dim);
    let lambda = raw.scale_real(0.5 / raw.norm());
    let rho0 = random_density(&mut r, dim, 0.2);
    (DissipativeModel::new(&h, &lambda, 1.0).expect("valid model"), rho0)
}
