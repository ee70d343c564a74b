//! Hyperoperators (linear maps on operators), the inner derivation, the
//! `Delta(A) = (e^{delta_A} - 1)/delta_A` hyperoperator and first quantum
//! derivatives, plus the convergence diagnostics of the derivative series.
//!
//! Vectorization is column stacking throughout: `vec(X)[i + j*d] = X[i,j]`,
//! so that `vec(X Y Z) = (Z^T (x) X) vec(Y)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::divdiff::first_divided_difference;
use crate::error::{QaError, Result};
use crate::operator::{c64, operator_norm, Operator, OperatorJson, C64, HERMITIAN_RTOL};
use crate::scalar_fn::{factorial, ScalarFunction};
use crate::spectrum::Spectrum;

/// Largest `d` for which a `d^2 x d^2` matrix is ever built.
pub const MAX_MATERIALIZED_DIM: usize = 32;

pub const VECTORIZATION_TAG: &str = "column-stacking";

/// A linear map on `d x d` operators stored as a `d^2 x d^2` matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HyperOperatorJson", into = "HyperOperatorJson")]
pub struct HyperOperator {
    dim: usize,
    matrix: DMatrix<C64>,
}

impl std::fmt::Debug for HyperOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HyperOperator(dim={}){}", self.dim, self.matrix)
    }
}

fn check_cap(dim: usize) -> Result<()> {
    if dim > MAX_MATERIALIZED_DIM {
        Err(QaError::DimensionCap { dim, cap: MAX_MATERIALIZED_DIM })
    } else {
        Ok(())
    }
}

/// Column-stacked vector of an operator.
pub fn vectorize(x: &Operator) -> DVector<C64> {
    DVector::from_column_slice(x.matrix().as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &DVector<C64>, dim: usize) -> Operator {
    Operator::from_fn(dim, |i, j| v[i + j * dim])
}

impl HyperOperator {
    pub fn new(dim: usize, matrix: DMatrix<C64>) -> Result<Self> {
        check_cap(dim)?;
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(QaError::DimensionMismatch { expected: n, found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(HyperOperator { dim, matrix })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_cap(dim)?;
        Ok(HyperOperator { dim, matrix: DMatrix::identity(dim * dim, dim * dim) })
    }

    /// The map `Y -> X Y Z`.
    pub fn sandwich(x: &Operator, z: &Operator) -> Result<Self> {
        x.check_same_dim(z)?;
        check_cap(x.dim())?;
        Ok(HyperOperator { dim: x.dim(), matrix: z.matrix().transpose().kronecker(x.matrix()) })
    }

    /// Materializes any linear map by applying it to the matrix units.
    pub fn from_linear_map(dim: usize, map: impl Fn(&Operator) -> Operator) -> Result<Self> {
        check_cap(dim)?;
        let n = dim * dim;
        let mut matrix = DMatrix::zeros(n, n);
        for col in 0..n {
            let unit = Operator::from_fn(dim, |i, j| if i + j * dim == col { c64(1.0, 0.0) } else { C64::default() });
            let image = map(&unit);
            for row in 0..n {
                matrix[(row, col)] = image.get(row % dim, row / dim);
            }
        }
        Ok(HyperOperator { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn apply(&self, b: &Operator) -> Result<Operator> {
        if b.dim() != self.dim {
            return Err(QaError::DimensionMismatch { expected: self.dim, found: b.dim() });
        }
        Ok(unvectorize(&(&self.matrix * vectorize(b)), self.dim))
    }

    /// `self o other`.
    pub fn compose(&self, other: &HyperOperator) -> Result<HyperOperator> {
        if other.dim != self.dim {
            return Err(QaError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(HyperOperator { dim: self.dim, matrix: &self.matrix * &other.matrix })
    }

    pub fn add(&self, other: &HyperOperator) -> Result<HyperOperator> {
        if other.dim != self.dim {
            return Err(QaError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(HyperOperator { dim: self.dim, matrix: &self.matrix + &other.matrix })
    }

    pub fn scale(&self, s: C64) -> HyperOperator {
        HyperOperator { dim: self.dim, matrix: &self.matrix * s }
    }

    /// Frobenius norm of the materialized matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperOperatorJson {
    dim: usize,
    matrix: OperatorJson,
    vectorization: String,
}

impl TryFrom<HyperOperatorJson> for HyperOperator {
    type Error = QaError;

    fn try_from(j: HyperOperatorJson) -> Result<HyperOperator> {
        if j.vectorization != VECTORIZATION_TAG {
            return Err(QaError::Format(format!(
                "unsupported vectorization {:?}, expected {VECTORIZATION_TAG:?}",
                j.vectorization
            )));
        }
        let m = Operator::try_from(j.matrix)?;
        HyperOperator::new(j.dim, m.into_matrix())
    }
}

impl From<HyperOperator> for HyperOperatorJson {
    fn from(h: HyperOperator) -> HyperOperatorJson {
        HyperOperatorJson {
            dim: h.dim,
            matrix: Operator::from_square(h.matrix).into(),
            vectorization: VECTORIZATION_TAG.to_string(),
        }
    }
}

/// `delta_A : Q -> [A, Q]`, i.e. `1 (x) A - A^T (x) 1`.
pub fn inner_derivation(a: &Operator) -> Result<HyperOperator> {
    let d = a.dim();
    check_cap(d)?;
    let id = DMatrix::<C64>::identity(d, d);
    let matrix = id.kronecker(a.matrix()) - a.matrix().transpose().kronecker(&id);
    Ok(HyperOperator { dim: d, matrix })
}

/// A hyperoperator diagonal in the eigenbasis of a Hermitian operator:
/// `X -> U (K o U^dag X U) U^dag` with `o` the entrywise product.
#[derive(Debug, Clone, PartialEq)]
pub struct DividedDifferenceKernel {
    base: Spectrum,
    table: DMatrix<C64>,
}

/// Absolute splitting threshold for a spectrum.
pub fn split_threshold(s: &Spectrum, split_rtol: f64) -> f64 {
    split_rtol * s.source_norm().max(1.0)
}

impl DividedDifferenceKernel {
    pub fn from_table(base: Spectrum, table: DMatrix<C64>) -> Result<Self> {
        let d = base.dim();
        if table.nrows() != d || table.ncols() != d {
            return Err(QaError::DimensionMismatch { expected: d, found: table.nrows() });
        }
        Ok(DividedDifferenceKernel { base, table })
    }

    /// `K_ij = f[lambda_i, lambda_j]`, the kernel of `df(A)/dA`.
    pub fn quantum_derivative(f: &ScalarFunction, base: &Spectrum, split_rtol: f64) -> Result<Self> {
        base.check_domain(f)?;
        let thr = split_threshold(base, split_rtol);
        let l = base.eigenvalues();
        let d = base.dim();
        let table = DMatrix::from_fn(d, d, |i, j| c64(first_divided_difference(f, l[i], l[j], thr), 0.0));
        Ok(DividedDifferenceKernel { base: base.clone(), table })
    }

    /// Kernel of `Delta(sA)`: `(e^x - 1)/x` with `x = s (lambda_i - lambda_j)`.
    pub fn delta(base: &Spectrum, s: f64) -> Self {
        let l = base.eigenvalues();
        let d = base.dim();
        let table = DMatrix::from_fn(d, d, |i, j| c64(exprel(s * (l[i] - l[j])), 0.0));
        DividedDifferenceKernel { base: base.clone(), table }
    }

    pub fn base(&self) -> &Spectrum {
        &self.base
    }

    pub fn table(&self) -> &DMatrix<C64> {
        &self.table
    }

    pub fn apply(&self, b: &Operator) -> Result<Operator> {
        if b.dim() != self.base.dim() {
            return Err(QaError::DimensionMismatch { expected: self.base.dim(), found: b.dim() });
        }
        Ok(self.base.apply_kernel(b, |i, j| self.table[(i, j)]))
    }

    pub fn to_hyperoperator(&self) -> Result<HyperOperator> {
        let d = self.base.dim();
        check_cap(d)?;
        HyperOperator::from_linear_map(d, |x| self.base.apply_kernel(x, |i, j| self.table[(i, j)]))
    }
}

/// `(e^x - 1)/x`, equal to 1 at `x = 0`.
pub fn exprel(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.abs() < 1e-8 {
        1.0 + 0.5 * x
    } else {
        x.exp_m1() / x
    }
}

fn hermitian_spectrum(a: &Operator) -> Result<Spectrum> {
    Spectrum::decompose(a, HERMITIAN_RTOL)
}

/// `Delta(A) = int_0^1 e^{t delta_A} dt`, materialized.
pub fn delta_hyperop(a: &Operator) -> Result<HyperOperator> {
    check_cap(a.dim())?;
    DividedDifferenceKernel::delta(&hermitian_spectrum(a)?, 1.0).to_hyperoperator()
}

/// `Delta(A) B` without materializing the hyperoperator.
pub fn apply_delta(a: &Operator, b: &Operator) -> Result<Operator> {
    DividedDifferenceKernel::delta(&hermitian_spectrum(a)?, 1.0).apply(b)
}

/// `df(A)/dA` as a materialized hyperoperator.
pub fn quantum_derivative(f: &ScalarFunction, a: &Operator) -> Result<HyperOperator> {
    check_cap(a.dim())?;
    DividedDifferenceKernel::quantum_derivative(f, &hermitian_spectrum(a)?, crate::divdiff::DEFAULT_SPLIT_RTOL)?
        .to_hyperoperator()
}

/// `df(A) = (df/dA) dA` through the divided-difference kernel.
pub fn quantum_derivative_apply(f: &ScalarFunction, a: &Operator, da: &Operator) -> Result<Operator> {
    DividedDifferenceKernel::quantum_derivative(f, &hermitian_spectrum(a)?, crate::divdiff::DEFAULT_SPLIT_RTOL)?
        .apply(da)
}

/// `d e^{-A} = -e^{-A} Delta(A) dA`.
pub fn d_exp_neg(a: &Operator, da: &Operator) -> Result<Operator> {
    let s = hermitian_spectrum(a)?;
    let inner = DividedDifferenceKernel::delta(&s, 1.0).apply(da)?;
    Ok(-(s.exp(c64(-1.0, 0.0)) * inner))
}

/// `d A^{-1} = -A^{-1} dA A^{-1}`.
pub fn d_inverse(a: &Operator, da: &Operator) -> Result<Operator> {
    a.check_same_dim(da)?;
    let s = hermitian_spectrum(a)?;
    let inv = s.apply(&ScalarFunction::inverse())?;
    Ok(-(&inv * da * &inv))
}

/// `d log A`, kernel `(log x - log y)/(x - y)`.
pub fn d_log(a: &Operator, da: &Operator) -> Result<Operator> {
    quantum_derivative_apply(&ScalarFunction::log(), a, da)
}

/// Partial sum `sum_{n<=N} (-1)^n/(n+1)! f^{(n+1)}(A) delta_A^n dA`.
pub fn series_derivative(f: &ScalarFunction, a: &Operator, da: &Operator, order: usize) -> Result<Operator> {
    Ok(series_derivative_terms(f, a, da, order)?.into_iter().fold(Operator::zeros(a.dim()), |acc, t| acc + t))
}

/// The individual terms `n = 0..=N` of [`series_derivative`].
pub fn series_derivative_terms(
    f: &ScalarFunction,
    a: &Operator,
    da: &Operator,
    order: usize,
) -> Result<Vec<Operator>> {
    a.check_same_dim(da)?;
    let s = hermitian_spectrum(a)?;
    s.check_domain(f)?;
    let l = s.eigenvalues().to_vec();
    let bt = s.to_eigenbasis(da);
    let d = s.dim();
    let mut terms = Vec::with_capacity(order + 1);
    for n in 0..=order {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign / factorial(n + 1);
        let m = DMatrix::from_fn(d, d, |i, j| {
            let x = l[i] - l[j];
            bt[(i, j)] * (w * f.derivative(n + 1, l[i]) * x.powi(n as i32))
        });
        terms.push(s.from_eigenbasis(&m));
    }
    Ok(terms)
}

fn positive_spectrum(a: &Operator) -> Result<Spectrum> {
    let s = hermitian_spectrum(a)?;
    if s.min_eigenvalue() <= 0.0 {
        return Err(QaError::DomainViolation(format!(
            "operator must be positive definite, smallest eigenvalue is {:.6e}",
            s.min_eigenvalue()
        )));
    }
    Ok(s)
}

/// `a_n = ||(A^{-1} delta_A)^n dA||^{1/n}` for `n = 1..=n_max`.
pub fn alpha_estimate(a: &Operator, da: &Operator, n_max: usize) -> Result<Vec<f64>> {
    a.check_same_dim(da)?;
    let s = positive_spectrum(a)?;
    let l = s.eigenvalues();
    let bt = s.to_eigenbasis(da);
    let d = s.dim();
    let ratio = DMatrix::from_fn(d, d, |i, j| (l[i] - l[j]) / l[i]);
    let mut current = bt;
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        current = current.zip_map(&ratio, |z, r| z * r);
        let norm = operator_norm(&Operator::from_square(current.clone()));
        out.push(norm.powf(1.0 / n as f64));
    }
    Ok(out)
}

/// Convergence verdict for a finite root sequence: the largest of the last
/// three terms.
pub fn alpha_verdict(terms: &[f64]) -> f64 {
    terms.iter().rev().take(3).fold(0.0, |m: f64, &x| m.max(x))
}

/// Both sides of `||e^{-A} delta_A^n B|| <= n^n e^{-n} ||(A^{-1} delta_A)^n B||`.
pub fn inequality_check(a: &Operator, b: &Operator, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(QaError::InvalidArgument("inequality order must be at least 1".into()));
    }
    a.check_same_dim(b)?;
    let s = positive_spectrum(a)?;
    let l = s.eigenvalues();
    let bt = s.to_eigenbasis(b);
    let d = s.dim();
    let p = n as i32;
    let lhs_m = DMatrix::from_fn(d, d, |i, j| bt[(i, j)] * ((-l[i]).exp() * (l[i] - l[j]).powi(p)));
    let rhs_m = DMatrix::from_fn(d, d, |i, j| bt[(i, j)] * ((l[i] - l[j]) / l[i]).powi(p));
    let nf = n as f64;
    let lhs = operator_norm(&Operator::from_square(lhs_m));
    let rhs = (nf * (nf.ln() - 1.0)).exp() * operator_norm(&Operator::from_square(rhs_m));
    Ok((lhs, rhs))
}

/// `M = max_{k <= k_max} ||A^{-1} B^{1/k} A||` for positive semidefinite `B`.
pub fn corollary_bound(a: &Operator, b: &Operator, k_max: usize) -> Result<f64> {
    if k_max == 0 {
        return Err(QaError::InvalidArgument("k_max must be at least 1".into()));
    }
    a.check_same_dim(b)?;
    let sa = positive_spectrum(a)?;
    let sb = hermitian_spectrum(b)?;
    let floor = -1e-12 * sb.source_norm().max(1.0);
    if sb.min_eigenvalue() < floor {
        return Err(QaError::DomainViolation(format!(
            "roots B^(1/k) need B positive semidefinite, smallest eigenvalue is {:.6e}",
            sb.min_eigenvalue()
        )));
    }
    let inv = sa.apply(&ScalarFunction::inverse())?;
    let mut best = 0.0f64;
    for k in 1..=k_max {
        let root = sb.map(|x| c64(x.max(0.0).powf(1.0 / k as f64), 0.0));
        best = best.max(operator_norm(&(&inv * &root * a)));
    }
    Ok(best)
}
