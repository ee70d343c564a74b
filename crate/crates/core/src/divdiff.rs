//! Divided differences `f[x_0, ..., x_k]` with confluent limits.
//!
//! First-order differences of the built-in functions use cancellation-free
//! closed forms. Higher orders use the recursive table, except on clusters
//! of nearby nodes where the Taylor expansion about the cluster mean is
//! summed instead:
//!
//! `f[x_0..x_k] = sum_{m>=k} f^{(m)}(c)/m! * h_{m-k}(x_0 - c, .., x_k - c)`
//!
//! with `h_j` the complete homogeneous symmetric polynomial of degree `j`.

use crate::scalar_fn::{factorial, FunctionKind, ScalarFunction};

/// Below this relative spread a cluster is treated as coalesced.
pub const DEFAULT_SPLIT_RTOL: f64 = 1e-7;

/// Clusters narrower than this are summed as a Taylor series.
const CLUSTER_SPREAD: f64 = 0.1;
const CLUSTER_MAX_TERMS: usize = 80;

/// `f[x, y]`, with `f'((x+y)/2)` whenever `|x - y| < threshold`.
pub fn first_divided_difference(f: &ScalarFunction, x: f64, y: f64, threshold: f64) -> f64 {
    let d = x - y;
    if d.abs() < threshold {
        return f.derivative(1, 0.5 * (x + y));
    }
    match f.kind() {
        FunctionKind::ExpNeg => (-y).exp() * (-d).exp_m1() / d,
        FunctionKind::ExpScaled(c) => (c * y).exp() * (c * d).exp_m1() / d,
        FunctionKind::Inverse => -1.0 / (x * y),
        FunctionKind::Log => (d / y).ln_1p() / d,
        FunctionKind::Custom(_) => (f.value(x) - f.value(y)) / d,
    }
}

/// Complete homogeneous symmetric polynomials `h_0..=h_max` of `ys`.
pub fn complete_homogeneous(ys: &[f64], max_degree: usize) -> Vec<f64> {
    let mut h = vec![0.0; max_degree + 1];
    h[0] = 1.0;
    for &y in ys {
        for j in 1..=max_degree {
            h[j] += y * h[j - 1];
        }
    }
    h
}

/// Order-`k` divided difference over `nodes` (`k = nodes.len() - 1`).
///
/// `threshold` is the absolute spread below which a group of nodes is
/// replaced by the confluent limit `f^{(k)}(mean)/k!`.
pub fn divided_difference(f: &ScalarFunction, nodes: &[f64], threshold: f64) -> f64 {
    assert!(!nodes.is_empty(), "divided difference needs at least one node");
    let mut xs = nodes.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 1 {
        return f.value(xs[0]);
    }
    if n == 2 {
        return first_divided_difference(f, xs[1], xs[0], threshold);
    }
    // table[i] holds f[x_i .. x_{i+k}] for the current order k
    let mut table: Vec<f64> = xs.iter().map(|&x| f.value(x)).collect();
    for k in 1..n {
        for i in 0..n - k {
            let lo = xs[i];
            let hi = xs[i + k];
            table[i] = if let Some(v) = cluster_value(f, &xs[i..=i + k], threshold) {
                v
            } else if k == 1 {
                first_divided_difference(f, hi, lo, threshold)
            } else {
                (table[i + 1] - table[i]) / (hi - lo)
            };
        }
    }
    table[0]
}

/// Direct evaluation for tightly grouped (sorted) nodes, or `None` when the
/// group is too wide and the recursion should be used.
fn cluster_value(f: &ScalarFunction, xs: &[f64], threshold: f64) -> Option<f64> {
    let k = xs.len() - 1;
    let spread = xs[k] - xs[0];
    let c = xs.iter().sum::<f64>() / xs.len() as f64;
    if spread < threshold {
        return Some(f.derivative(k, c) / factorial(k));
    }
    if k < 2 || spread > CLUSTER_SPREAD {
        return None;
    }
    let floor = f.domain_floor();
    if floor.is_finite() && spread > 0.25 * (c - floor) {
        return None;
    }
    let ys: Vec<f64> = xs.iter().map(|x| x - c).collect();
    let h = complete_homogeneous(&ys, CLUSTER_MAX_TERMS);
    let mut sum = 0.0;
    let mut small_run = 0;
    for j in 0..CLUSTER_MAX_TERMS {
        let m = k + j;
        let term = f.derivative(m, c) / factorial(m) * h[j];
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            small_run += 1;
            if small_run >= 3 {
                break;
            }
        } else {
            small_run = 0;
        }
    }
    Some(sum)
}
