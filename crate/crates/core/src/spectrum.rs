//! Eigen-decomposition of Hermitian operators and functions of them.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{QaError, Result};
use crate::operator::{c64, Operator, C64, HERMITIAN_RTOL};
use crate::scalar_fn::ScalarFunction;

/// Eigenvalues (ascending) and an orthonormal eigenbasis of a Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    eigenvectors: DMatrix<C64>,
    source_norm: f64,
}

/// Decomposes a Hermitian operator with the default Hermiticity tolerance.
pub fn spectral_decompose(a: &Operator) -> Result<Spectrum> {
    Spectrum::decompose(a, HERMITIAN_RTOL)
}

/// `f(A) = U diag(f(lambda_i)) U^dag`.
pub fn apply_scalar_function(s: &Spectrum, f: &ScalarFunction) -> Result<Operator> {
    s.apply(f)
}

/// Central difference `[f(A + hB) - f(A - hB)] / 2h`.
///
/// A non-Hermitian `B` is split as `B = X + iY` with `X`, `Y` Hermitian and
/// the two real directions are differenced separately, so that every
/// perturbed operand stays Hermitian.
pub fn gateaux_fd(f: &ScalarFunction, a: &Operator, b: &Operator, h: f64) -> Result<Operator> {
    if !(h > 0.0) {
        return Err(QaError::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    a.check_same_dim(b)?;
    a.check_hermitian(HERMITIAN_RTOL)?;
    let a = a.hermitian_part();
    let x = b.hermitian_part();
    let y = b.anti_hermitian_part().scale(c64(0.0, -1.0));
    let diff = |dir: &Operator| -> Result<Operator> {
        if dir.frobenius_norm() == 0.0 {
            return Ok(Operator::zeros(a.dim()));
        }
        let plus = Spectrum::decompose(&(&a + dir.scale_real(h)).hermitian_part(), HERMITIAN_RTOL)?.apply(f)?;
        let minus = Spectrum::decompose(&(&a - dir.scale_real(h)).hermitian_part(), HERMITIAN_RTOL)?.apply(f)?;
        Ok((plus - minus).scale_real(0.5 / h))
    };
    let dx = diff(&x)?;
    let dy = diff(&y)?;
    Ok(dx + dy.scale(c64(0.0, 1.0)))
}

impl Spectrum {
    /// Errors with [`QaError::NotHermitian`] when `||A - A^dag||_F` exceeds
    /// `rtol * max(1, ||A||_F)`; only the Hermitian part is decomposed.
    pub fn decompose(a: &Operator, rtol: f64) -> Result<Spectrum> {
        a.check_hermitian(rtol)?;
        let h = a.hermitian_part().into_matrix();
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0).ok_or(QaError::DecompositionFailure)?;
        let d = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(QaError::DecompositionFailure);
        }
        let eigenvectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
        let source_norm = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(Spectrum { eigenvalues, eigenvectors, source_norm })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// Spectral norm of the decomposed operator.
    pub fn source_norm(&self) -> f64 {
        self.source_norm
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `max lambda - min lambda`.
    pub fn spread(&self) -> f64 {
        self.max_eigenvalue() - self.min_eigenvalue()
    }

    /// `U diag(lambda) U^dag`.
    pub fn reconstruct(&self) -> Operator {
        self.map(|x| c64(x, 0.0))
    }

    /// Errors unless every eigenvalue is strictly above `f.domain_floor()`.
    pub fn check_domain(&self, f: &ScalarFunction) -> Result<()> {
        match self.eigenvalues.iter().find(|&&x| !f.admits(x)) {
            None => Ok(()),
            Some(x) => Err(QaError::DomainViolation(format!(
                "eigenvalue {x:.6e} is not above the domain floor {} of {}",
                f.domain_floor(),
                f.name()
            ))),
        }
    }

    pub fn apply(&self, f: &ScalarFunction) -> Result<Operator> {
        self.check_domain(f)?;
        Ok(self.map(|x| c64(f.value(x), 0.0)))
    }

    /// `f^{(n)}(A)`.
    pub fn apply_derivative(&self, f: &ScalarFunction, n: usize) -> Result<Operator> {
        self.check_domain(f)?;
        Ok(self.map(|x| c64(f.derivative(n, x), 0.0)))
    }

    /// `U diag(g(lambda_i)) U^dag` for an arbitrary complex-valued `g`.
    pub fn map(&self, g: impl Fn(f64) -> C64) -> Operator {
        let d = self.dim();
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (c, &x) in self.eigenvalues.iter().enumerate() {
            let v = g(x);
            for r in 0..d {
                scaled[(r, c)] *= v;
            }
        }
        Operator::from_square(scaled * u.adjoint())
    }

    /// `exp(z A)` for complex `z`.
    pub fn exp(&self, z: C64) -> Operator {
        self.map(|x| (z * x).exp())
    }

    /// `U^dag X U`: the matrix of `X` in the eigenbasis.
    pub fn to_eigenbasis(&self, x: &Operator) -> DMatrix<C64> {
        self.eigenvectors.adjoint() * x.matrix() * &self.eigenvectors
    }

    /// `U M U^dag`: back from the eigenbasis.
    pub fn from_eigenbasis(&self, m: &DMatrix<C64>) -> Operator {
        Operator::from_square(&self.eigenvectors * m * self.eigenvectors.adjoint())
    }

    /// Applies the kernel `X_ij -> k(i, j) X_ij` in the eigenbasis.
    pub fn apply_kernel(&self, x: &Operator, k: impl Fn(usize, usize) -> C64) -> Operator {
        let mut m = self.to_eigenbasis(x);
        let d = self.dim();
        for j in 0..d {
            for i in 0..d {
                m[(i, j)] *= k(i, j);
            }
        }
        self.from_eigenbasis(&m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::operator_norm;

    fn sigma_x() -> Operator {
        Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    #[test]
    fn diagonal_input() {
        let s = spectral_decompose(&Operator::from_real_diagonal(&[2.0, 1.0])).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 2.0]);
        assert!(operator_norm(&(s.reconstruct() - Operator::from_real_diagonal(&[2.0, 1.0]))) < 1e-15);
        assert_eq!(s.source_norm(), 2.0);
    }

    #[test]
    fn pauli_x_spectrum() {
        let s = spectral_decompose(&sigma_x()).unwrap();
        assert!((s.eigenvalues()[0] + 1.0).abs() < 1e-15);
        assert!((s.eigenvalues()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(spectral_decompose(&a), Err(QaError::NotHermitian { .. })));
    }

    #[test]
    fn function_examples() {
        let s = spectral_decompose(&Operator::from_real_diagonal(&[1.0, 2.0])).unwrap();
        let e = s.apply(&ScalarFunction::exp_neg()).unwrap();
        assert!((e.get(0, 0).re - (-1.0f64).exp()).abs() < 1e-15);
        assert!((e.get(1, 1).re - (-2.0f64).exp()).abs() < 1e-15);
        let id = spectral_decompose(&Operator::identity(3)).unwrap();
        assert!(operator_norm(&id.apply(&ScalarFunction::log()).unwrap()) < 1e-15);
    }

    #[test]
    fn inverse_matches_direct_inversion() {
        let a = sigma_x().scale_real(2.0) + Operator::identity(2).scale_real(3.0);
        let inv = spectral_decompose(&a).unwrap().apply(&ScalarFunction::inverse()).unwrap();
        let direct = Operator::new(a.matrix().clone().try_inverse().unwrap()).unwrap();
        assert!(operator_norm(&(inv - direct)) < 1e-12);
    }

    #[test]
    fn positivity_gate() {
        let s = spectral_decompose(&Operator::from_real_diagonal(&[0.0, 1.0])).unwrap();
        assert!(matches!(s.apply(&ScalarFunction::log()), Err(QaError::DomainViolation(_))));
        assert!(matches!(s.apply(&ScalarFunction::inverse()), Err(QaError::DomainViolation(_))));
        assert!(s.apply(&ScalarFunction::exp_neg()).is_ok());
    }

    #[test]
    fn gateaux_example() {
        let a = Operator::from_real_diagonal(&[1.0, 2.0]);
        let d = gateaux_fd(&ScalarFunction::exp_neg(), &a, &sigma_x(), 1e-6).unwrap();
        let expected = -((-1.0f64).exp() - (-2.0f64).exp());
        assert!((d.get(0, 1).re - expected).abs() < 1e-8);
        assert!((d.get(1, 0).re - expected).abs() < 1e-8);
        assert!(d.get(0, 0).norm() < 1e-8);
        let zero = gateaux_fd(&ScalarFunction::log(), &a, &Operator::zeros(2), 1e-6).unwrap();
        assert_eq!(operator_norm(&zero), 0.0);
    }

    #[test]
    fn gateaux_commuting_direction() {
        let a = Operator::from_real_diagonal(&[1.0, 2.0]);
        let d = gateaux_fd(&ScalarFunction::log(), &a, &a, 1e-6).unwrap();
        // f'(A) A = A^{-1} A = 1
        assert!(operator_norm(&(d - Operator::identity(2))) < 1e-9);
    }

    #[test]
    fn gateaux_rejects_bad_step() {
        let a = Operator::identity(2);
        assert!(gateaux_fd(&ScalarFunction::exp_neg(), &a, &a, 0.0).is_err());
        let small = Operator::from_real_diagonal(&[1e-7, 1.0]);
        let r = gateaux_fd(&ScalarFunction::log(), &small, &Operator::identity(2).scale_real(-1.0), 1e-6);
        assert!(matches!(r, Err(QaError::DomainViolation(_))));
    }
}
