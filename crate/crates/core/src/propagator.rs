//! Time-stepping building blocks: fourth-order Magnus steps for unitary
//! propagation and a classical RK4 step for operator ODEs.

use crate::error::{QaError, Result};
use crate::operator::{c64, Operator, HERMITIAN_RTOL};
use crate::spectrum::Spectrum;

const SQRT3_6: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6
const SQRT3_12: f64 = 0.144_337_567_297_406_4; // sqrt(3)/12

/// Unitary propagator from `t` to `t + h` for `i hbar dU/dt = H(t) U`,
/// fourth order in `h` (two-point Gauss Magnus expansion). Exactly unitary.
pub fn magnus4_step(hamiltonian: &dyn Fn(f64) -> Operator, t: f64, h: f64, hbar: f64) -> Result<Operator> {
    let h1 = hamiltonian(t + (0.5 - SQRT3_6) * h);
    let h2 = hamiltonian(t + (0.5 + SQRT3_6) * h);
    // Omega = -i/hbar (h/2)(H1 + H2) - (sqrt3/12) h^2 / hbar^2 [H2, H1]; i*Omega is Hermitian
    let sum = (&h1 + &h2).scale_real(0.5 * h / hbar);
    let comm = h2.commutator(&h1).scale(c64(0.0, -SQRT3_12 * h * h / (hbar * hbar)));
    let generator = (sum + comm).hermitian_part();
    let s = Spectrum::decompose(&generator, HERMITIAN_RTOL * 1e3)?;
    Ok(s.exp(c64(0.0, -1.0)))
}

/// One classical Runge-Kutta step of `dY/dt = rhs(t, Y)`.
pub fn rk4_step(rhs: &dyn Fn(f64, &Operator) -> Operator, t: f64, y: &Operator, h: f64) -> Operator {
    let k1 = rhs(t, y);
    let k2 = rhs(t + 0.5 * h, &(y + k1.scale_real(0.5 * h)));
    let k3 = rhs(t + 0.5 * h, &(y + k2.scale_real(0.5 * h)));
    let k4 = rhs(t + h, &(y + k3.scale_real(h)));
    let incr = k1 + k2.scale_real(2.0) + k3.scale_real(2.0) + k4;
    y + incr.scale_real(h / 6.0)
}

/// Step-halving control settings shared by the fixed-step integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Accept when the coarse and refined runs differ by at most
    /// `rtol * max(1, ||state||)`.
    pub rtol: f64,
    pub max_halvings: usize,
    /// Starting number of substeps per output interval.
    pub initial_substeps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rtol: 1e-10, max_halvings: 8, initial_substeps: 1 }
    }
}

/// Runs `integrate(substeps)` with doubling substep counts until two
/// successive results agree, returning the finer run and its substep count.
pub fn with_step_halving<T>(
    control: &StepControl,
    mut integrate: impl FnMut(usize) -> Result<Vec<Operator>>,
    finish: impl Fn(Vec<Operator>, usize) -> T,
) -> Result<T> {
    let mut substeps = control.initial_substeps.max(1);
    let mut previous = integrate(substeps)?;
    for _ in 0..control.max_halvings {
        substeps *= 2;
        let current = integrate(substeps)?;
        let mut worst = 0.0f64;
        for (a, b) in previous.iter().zip(&current) {
            let scale = b.frobenius_norm().max(1.0);
            worst = worst.max((a - b).frobenius_norm() / scale);
        }
        if !current.iter().all(Operator::is_finite) {
            return Err(QaError::StepFailure("non-finite state".into()));
        }
        if worst <= control.rtol {
            return Ok(finish(current, substeps));
        }
        previous = current;
    }
    Err(QaError::StepFailure(format!(
        "no convergence after {} halvings ({} substeps per interval)",
        control.max_halvings, substeps
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::operator_norm;

    #[test]
    fn magnus_step_is_exact_for_constant_hamiltonian() {
        let h = Operator::from_real_rows(&[&[1.0, 0.3], &[0.3, -0.5]]).unwrap();
        let hc = h.clone();
        let u = magnus4_step(&move |_| hc.clone(), 0.0, 0.7, 1.0).unwrap();
        let exact = Spectrum::decompose(&h, 1e-10).unwrap().exp(c64(0.0, -0.7));
        assert!(operator_norm(&(u.clone() - exact)) < 1e-14);
        assert!(operator_norm(&(u.adjoint() * &u - Operator::identity(2))) < 1e-14);
    }

    #[test]
    fn magnus_step_order() {
        // error per step should fall by ~32 when h halves
        let x = Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let z = Operator::from_real_diagonal(&[1.0, -1.0]);
        let ham = move |t: f64| &z + x.scale_real(t);
        let reference = |h: f64| {
            let n = 512;
            let mut u = Operator::identity(2);
            for k in 0..n {
                u = magnus4_step(&ham, k as f64 * h / n as f64, h / n as f64, 1.0).unwrap() * u;
            }
            u
        };
        let err = |h: f64| operator_norm(&(magnus4_step(&ham, 0.0, h, 1.0).unwrap() - reference(h)));
        let ratio = err(0.2) / err(0.1);
        assert!(ratio > 25.0 && ratio < 40.0, "ratio {ratio}");
    }

    #[test]
    fn rk4_exponential() {
        let a = Operator::from_real_diagonal(&[-1.0, 0.5]);
        let rhs = move |_t: f64, y: &Operator| &a * y;
        let mut y = Operator::identity(2);
        for k in 0..100 {
            y = rk4_step(&rhs, k as f64 * 0.01, &y, 0.01);
        }
        assert!((y.get(0, 0).re - (-1.0f64).exp()).abs() < 1e-10);
        assert!((y.get(1, 1).re - 0.5f64.exp()).abs() < 1e-10);
    }
}
