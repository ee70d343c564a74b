#![allow(dead_code)]

use hyperop_core::{c64, Operator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scaling-and-squaring Taylor exponential, independent of any eigensolver.
pub fn exp_taylor(x: &Operator) -> Operator {
    let norm = x.frobenius_norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = x.scale_real(0.5f64.powi(squarings));
    let mut term = Operator::identity(x.dim());
    let mut sum = term.clone();
    for k in 1..30 {
        term = (&term * &scaled).scale_real(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn pauli(k: usize) -> Operator {
    match k {
        1 => Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap(),
        2 => Operator::from_rows(&[&[c64(0.0, 0.0), c64(0.0, -1.0)], &[c64(0.0, 1.0), c64(0.0, 0.0)]]).unwrap(),
        3 => Operator::from_real_diagonal(&[1.0, -1.0]),
        _ => Operator::identity(2),
    }
}
