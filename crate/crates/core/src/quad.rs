//! Quadrature helpers: Gauss-Legendre panels and cumulative trapezoid sums
//! with Richardson extrapolation, for scalar and operator-valued integrands.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{QaError, Result};

/// `(node, weight)` pairs of an `n`-point Gauss-Legendre rule on each of
/// `panels` equal sub-intervals of `[a, b]`.
pub fn gauss_legendre_panels(n: usize, a: f64, b: f64, panels: usize) -> Result<Vec<(f64, f64)>> {
    let degree = NonZeroUsize::new(n).ok_or_else(|| QaError::InvalidArgument("quadrature needs at least one node".into()))?;
    if panels == 0 {
        return Err(QaError::InvalidArgument("quadrature needs at least one panel".into()));
    }
    let rule = GaussLegendre::new(degree);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(n * panels);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let half = 0.5 * width;
        for (x, w) in rule.as_node_weight_pairs() {
            out.push((lo + half * (x + 1.0), half * w));
        }
    }
    Ok(out)
}

/// A uniform grid of `intervals + 1` points on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub a: f64,
    pub b: f64,
    pub intervals: usize,
}

impl UniformGrid {
    /// The coarsest grid on `[a, b]` whose spacing does not exceed `max_step`.
    pub fn with_max_step(a: f64, b: f64, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(QaError::InvalidArgument(format!("bad grid [{a}, {b}] with step {max_step}")));
        }
        let intervals = (((b - a).abs() / max_step) - 1e-9).ceil().max(1.0) as usize;
        Ok(UniformGrid { a, b, intervals })
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.intervals as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k == self.intervals {
            self.b
        } else {
            self.a + k as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.intervals).map(|k| self.point(k)).collect()
    }

    pub fn refined(&self) -> Self {
        UniformGrid { intervals: 2 * self.intervals, ..*self }
    }
}

/// Richardson combination of a coarse and a twice-finer estimate with
/// leading error `O(h^order)`.
pub fn richardson<T, S>(coarse: T, fine: T, order: i32) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<S, Output = T> + std::ops::Add<Output = T> + Clone,
    S: From<f64>,
{
    let k = 2f64.powi(order);
    fine.clone() + (fine - coarse) * S::from(1.0 / (k - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panels_integrate_polynomials_exactly() {
        let pts = gauss_legendre_panels(4, -1.0, 2.0, 3).unwrap();
        let v: f64 = pts.iter().map(|(x, w)| w * x.powi(7)).sum();
        assert!((v - (2f64.powi(8) - 1.0) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_removes_leading_error() {
        let trap = |n: usize| {
            let g = UniformGrid { a: 0.0, b: 1.0, intervals: n };
            let h = g.step();
            let ys: Vec<f64> = g.points().iter().map(|x| x.exp()).collect();
            h * (ys.iter().sum::<f64>() - 0.5 * (ys[0] + ys[n]))
        };
        let exact = 1f64.exp() - 1.0;
        let r: f64 = richardson::<f64, f64>(trap(16), trap(32), 2);
        assert!((trap(32) - exact).abs() > 1e-5);
        assert!((r - exact).abs() < 1e-8);
    }

    #[test]
    fn grid_spacing() {
        let g = UniformGrid::with_max_step(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.intervals, 4);
        assert_eq!(g.point(4), 1.0);
        let g = UniformGrid::with_max_step(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g.intervals, 4);
    }
}
