//! Dense complex operators on a d-dimensional Hilbert space.
//!
//! [`Operator`] is the universal operand of the crate: Hamiltonians, currents,
//! density matrices, perturbations and dissipators are all values of this
//! type. Operators serialize to `{"dim": d, "re": [[..]], "im": [[..]]}` with
//! row-major nested arrays.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{QaError, Result};

pub type C64 = Complex<f64>;

/// Relative Hermiticity tolerance: `||A - A^dag||_F <= HERMITIAN_RTOL * max(1, ||A||_F)`.
pub const HERMITIAN_RTOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Units and tolerances shared across modules. `hbar` is never hard-coded
/// anywhere else; every time-dependent routine takes it from here or from a
/// setup record that carries it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericConfig {
    pub hbar: f64,
    pub hermitian_rtol: f64,
    /// Divided-difference splitting threshold, relative to `max(1, ||A||)`.
    pub split_rtol: f64,
    /// Step of the central-difference Gateaux oracle.
    pub fd_step: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig { hbar: 1.0, hermitian_rtol: HERMITIAN_RTOL, split_rtol: 1e-7, fd_step: 1e-6 }
    }
}

/// A square complex matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorJson", into = "OperatorJson")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[cfg_attr(feature = "schema", schemars(with = "OperatorJson"))]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(QaError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(QaError::InvalidArgument("operator dimension must be positive".into()));
        }
        Ok(Operator { m })
    }

    /// Wraps a matrix already known to be square (internal use).
    pub(crate) fn from_square(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Operator { m }
    }

    pub fn zeros(dim: usize) -> Self {
        Operator { m: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Operator { m: DMatrix::identity(dim, dim) }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Operator { m: DMatrix::from_fn(dim, dim, f) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        Operator::from_fn(d, |i, j| if i == j { c64(diag[i], 0.0) } else { C64::default() })
    }

    /// Builds from row-major complex entries.
    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(QaError::Format("rows must all have length dim".into()));
        }
        Operator::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    /// Builds from row-major real entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(QaError::Format("rows must all have length dim".into()));
        }
        Operator::new(DMatrix::from_fn(d, d, |i, j| c64(rows[i][j], 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn adjoint(&self) -> Operator {
        Operator { m: self.m.adjoint() }
    }

    pub fn transpose(&self) -> Operator {
        Operator { m: self.m.transpose() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator { m: &self.m * s }
    }

    pub fn scale_real(&self, s: f64) -> Operator {
        Operator { m: &self.m * c64(s, 0.0) }
    }

    /// `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator { m: &self.m * &other.m - &other.m * &self.m }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Spectral norm (largest singular value).
    pub fn norm(&self) -> f64 {
        operator_norm(self)
    }

    pub fn hermitian_part(&self) -> Operator {
        Operator { m: (&self.m + self.m.adjoint()) * c64(0.5, 0.0) }
    }

    pub fn anti_hermitian_part(&self) -> Operator {
        Operator { m: (&self.m - self.m.adjoint()) * c64(0.5, 0.0) }
    }

    /// `||A - A^dag||_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.m - self.m.adjoint()).norm()
    }

    pub fn hermitian_tolerance(&self, rtol: f64) -> f64 {
        rtol * self.frobenius_norm().max(1.0)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= self.hermitian_tolerance(HERMITIAN_RTOL)
    }

    /// Errors with [`QaError::NotHermitian`] unless `||A - A^dag||_F <= rtol * max(1, ||A||_F)`.
    pub fn check_hermitian(&self, rtol: f64) -> Result<()> {
        let deviation = self.hermiticity_defect();
        let tolerance = self.hermitian_tolerance(rtol);
        if deviation <= tolerance {
            Ok(())
        } else {
            Err(QaError::NotHermitian { deviation, tolerance })
        }
    }

    pub fn check_same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(QaError::DimensionMismatch { expected: self.dim(), found: other.dim() })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Operator) -> Operator {
        Operator { m: self.m.kronecker(&other.m) }
    }

    /// Real and imaginary parts as row-major nested arrays.
    pub fn to_parts(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = self.dim();
        let re = (0..d).map(|i| (0..d).map(|j| self.m[(i, j)].re).collect()).collect();
        let im = (0..d).map(|i| (0..d).map(|j| self.m[(i, j)].im).collect()).collect();
        (re, im)
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator(dim={}){}", self.dim(), self.m)
    }
}

/// Largest singular value.
pub fn operator_norm(o: &Operator) -> f64 {
    if o.m.iter().all(|z| *z == C64::default()) {
        return 0.0;
    }
    o.m.singular_values().max()
}

/// Wire form of an [`Operator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct OperatorJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TryFrom<OperatorJson> for Operator {
    type Error = QaError;

    fn try_from(j: OperatorJson) -> Result<Operator> {
        let d = j.dim;
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if d == 0 || !shape_ok(&j.re) || !shape_ok(&j.im) {
            return Err(QaError::Format(format!("expected {d}x{d} nested arrays for re and im")));
        }
        Ok(Operator::from_fn(d, |r, c| c64(j.re[r][c], j.im[r][c])))
    }
}

impl From<Operator> for OperatorJson {
    fn from(o: Operator) -> OperatorJson {
        let (re, im) = o.to_parts();
        OperatorJson { dim: o.dim(), re, im }
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&Operator> for &Operator {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                Operator { m: &self.m $op &rhs.m }
            }
        }
        impl $tr<Operator> for Operator {
            type Output = Operator;
            fn $method(self, rhs: Operator) -> Operator {
                Operator { m: self.m $op rhs.m }
            }
        }
        impl $tr<&Operator> for Operator {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                Operator { m: self.m $op &rhs.m }
            }
        }
        impl $tr<Operator> for &Operator {
            type Output = Operator;
            fn $method(self, rhs: Operator) -> Operator {
                Operator { m: &self.m $op rhs.m }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        self.m += &rhs.m;
    }
}

impl SubAssign<&Operator> for Operator {
    fn sub_assign(&mut self, rhs: &Operator) {
        self.m -= &rhs.m;
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, s: C64) -> Operator {
        self.scale(s)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, s: f64) -> Operator {
        self.scale_real(s)
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;
    fn mul(self, s: f64) -> Operator {
        Operator { m: self.m * c64(s, 0.0) }
    }
}

impl Mul<C64> for Operator {
    type Output = Operator;
    fn mul(self, s: C64) -> Operator {
        Operator { m: self.m * s }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -&self.m }
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -self.m }
    }
}
