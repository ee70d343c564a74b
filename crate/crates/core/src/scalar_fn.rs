//! Scalar functions with closed-form derivatives of every order.

use std::fmt;
use std::sync::Arc;

/// Which built-in function (if any) a [`ScalarFunction`] represents.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    /// `x -> e^{-x}`
    ExpNeg,
    /// `x -> 1/x`
    Inverse,
    /// `x -> log x`
    Log,
    /// `x -> e^{c x}`
    ExpScaled(f64),
    Custom(String),
}

type DerivativeFn = dyn Fn(usize, f64) -> f64 + Send + Sync;

/// A real analytic function `f` together with all of its derivatives
/// `f^{(n)}`, and the floor below which its argument is inadmissible.
#[derive(Clone)]
pub struct ScalarFunction {
    kind: FunctionKind,
    derivative: Arc<DerivativeFn>,
    /// Eigenvalues must be strictly greater than this.
    domain_floor: f64,
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunction")
            .field("kind", &self.kind)
            .field("domain_floor", &self.domain_floor)
            .finish()
    }
}

/// `n!` as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

impl ScalarFunction {
    pub fn exp_neg() -> Self {
        ScalarFunction {
            kind: FunctionKind::ExpNeg,
            derivative: Arc::new(|n, x| if n % 2 == 0 { (-x).exp() } else { -(-x).exp() }),
            domain_floor: f64::NEG_INFINITY,
        }
    }

    pub fn inverse() -> Self {
        ScalarFunction {
            kind: FunctionKind::Inverse,
            derivative: Arc::new(|n, x| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * factorial(n) / x.powi(n as i32 + 1)
            }),
            domain_floor: 0.0,
        }
    }

    pub fn log() -> Self {
        ScalarFunction {
            kind: FunctionKind::Log,
            derivative: Arc::new(|n, x| {
                if n == 0 {
                    x.ln()
                } else {
                    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                    sign * factorial(n - 1) / x.powi(n as i32)
                }
            }),
            domain_floor: 0.0,
        }
    }

    pub fn exp_scaled(c: f64) -> Self {
        ScalarFunction {
            kind: FunctionKind::ExpScaled(c),
            derivative: Arc::new(move |n, x| c.powi(n as i32) * (c * x).exp()),
            domain_floor: f64::NEG_INFINITY,
        }
    }

    /// A user-supplied function. `derivative(n, x)` must return `f^{(n)}(x)`
    /// for every `n` the caller will request.
    pub fn custom(
        name: impl Into<String>,
        domain_floor: f64,
        derivative: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarFunction {
            kind: FunctionKind::Custom(name.into()),
            derivative: Arc::new(derivative),
            domain_floor,
        }
    }

    pub fn identity() -> Self {
        Self::custom("identity", f64::NEG_INFINITY, |n, x| match n {
            0 => x,
            1 => 1.0,
            _ => 0.0,
        })
    }

    pub fn square() -> Self {
        Self::custom("square", f64::NEG_INFINITY, |n, x| match n {
            0 => x * x,
            1 => 2.0 * x,
            2 => 2.0,
            _ => 0.0,
        })
    }

    /// `x -> -log x`; applied to a density matrix this gives the entropy operator.
    pub fn neg_log() -> Self {
        let log = Self::log();
        Self::custom("neg_log", 0.0, move |n, x| -log.derivative(n, x))
    }

    /// `x -> -x log x`, the von Neumann entropy density.
    pub fn entropy_density() -> Self {
        Self::custom("entropy_density", 0.0, |n, x| match n {
            0 => -x * x.ln(),
            1 => -x.ln() - 1.0,
            _ => {
                // d^n/dx^n (-x log x) = (-1)^{n-1} (n-2)! / x^{n-1}  for n >= 2
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                sign * factorial(n - 2) / x.powi(n as i32 - 1)
            }
        })
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            FunctionKind::ExpNeg => "exp_neg".into(),
            FunctionKind::Inverse => "inverse".into(),
            FunctionKind::Log => "log".into(),
            FunctionKind::ExpScaled(c) => format!("exp_scaled({c})"),
            FunctionKind::Custom(name) => name.clone(),
        }
    }

    pub fn domain_floor(&self) -> f64 {
        self.domain_floor
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.derivative)(0, x)
    }

    pub fn derivative(&self, n: usize, x: f64) -> f64 {
        (self.derivative)(n, x)
    }

    /// The function `x -> f^{(n)}(x)` as a new [`ScalarFunction`].
    pub fn nth_derivative(&self, n: usize) -> ScalarFunction {
        let inner = self.derivative.clone();
        ScalarFunction {
            kind: FunctionKind::Custom(format!("{}^({n})", self.name())),
            derivative: Arc::new(move |k, x| inner(n + k, x)),
            domain_floor: self.domain_floor,
        }
    }

    pub fn admits(&self, x: f64) -> bool {
        x > self.domain_floor
    }

    /// Parses the names used in configuration files.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp_neg" => Some(Self::exp_neg()),
            "inverse" => Some(Self::inverse()),
            "log" => Some(Self::log()),
            "identity" => Some(Self::identity()),
            "square" => Some(Self::square()),
            "neg_log" => Some(Self::neg_log()),
            "entropy_density" => Some(Self::entropy_density()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sixth-order central difference of `f^{(n-1)}`.
    fn numeric_derivative(f: &ScalarFunction, n: usize, x: f64) -> f64 {
        let h = 1e-3;
        let g = |t: f64| f.derivative(n - 1, t);
        (-g(x - 3.0 * h) + 9.0 * g(x - 2.0 * h) - 45.0 * g(x - h) + 45.0 * g(x + h) - 9.0 * g(x + 2.0 * h)
            + g(x + 3.0 * h))
            / (60.0 * h)
    }

    #[test]
    fn derivative_zero_is_value() {
        for f in [ScalarFunction::exp_neg(), ScalarFunction::inverse(), ScalarFunction::log()] {
            for x in [0.5, 1.0, 2.5] {
                assert_eq!(f.derivative(0, x), f.value(x));
            }
        }
        assert_eq!(ScalarFunction::exp_neg().value(1.0), (-1.0f64).exp());
        assert_eq!(ScalarFunction::inverse().value(4.0), 0.25);
        assert_eq!(ScalarFunction::log().value(1.0), 0.0);
    }

    #[test]
    fn builtin_derivatives_match_closed_forms() {
        let x = 1.7f64;
        let e = ScalarFunction::exp_neg();
        assert!((e.derivative(3, x) + (-x).exp()).abs() < 1e-15);
        let inv = ScalarFunction::inverse();
        assert!((inv.derivative(2, x) - 2.0 / x.powi(3)).abs() < 1e-14);
        let log = ScalarFunction::log();
        assert!((log.derivative(3, x) - 2.0 / x.powi(3)).abs() < 1e-14);
        let s = ScalarFunction::exp_scaled(-0.5);
        assert!((s.derivative(2, x) - 0.25 * (-0.5 * x).exp()).abs() < 1e-15);
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        let fs = [
            ScalarFunction::exp_neg(),
            ScalarFunction::inverse(),
            ScalarFunction::log(),
            ScalarFunction::exp_scaled(0.7),
            ScalarFunction::entropy_density(),
            ScalarFunction::neg_log(),
        ];
        for f in &fs {
            for n in 1..=4 {
                for x in [0.8, 1.3, 2.0] {
                    let exact = f.derivative(n, x);
                    let approx = numeric_derivative(f, n, x);
                    assert!(
                        (exact - approx).abs() <= 1e-8 * exact.abs().max(1.0),
                        "{} n={n} x={x}: {exact} vs {approx}",
                        f.name()
                    );
                }
            }
        }
    }

    #[test]
    fn nth_derivative_shifts_order() {
        let f = ScalarFunction::log().nth_derivative(2);
        assert_eq!(f.value(2.0), ScalarFunction::log().derivative(2, 2.0));
        assert_eq!(f.derivative(1, 2.0), ScalarFunction::log().derivative(3, 2.0));
    }
}
