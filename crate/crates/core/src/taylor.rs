//! Higher-order quantum derivatives `d^n f(A)/dA^n : B^n`, the operator
//! Taylor expansion and its nonlinear-response specialization, and the
//! order-by-order series of the second derivative.
//!
//! In the eigenbasis of `A` the `(i_0, i_n)` entry of `d^n f(A)/dA^n : B^n`
//! is `n! sum f[l_{i_0}, .., l_{i_n}] B_{i_0 i_1} .. B_{i_{n-1} i_n}` over all
//! intermediate indices.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::divdiff::{complete_homogeneous, divided_difference, DEFAULT_SPLIT_RTOL};
use crate::error::{QaError, Result};
use crate::hyperop::split_threshold;
use crate::operator::{c64, operator_norm, Operator, C64, HERMITIAN_RTOL};
use crate::scalar_fn::{factorial, ScalarFunction};
use crate::spectrum::Spectrum;

/// Default largest derivative order (cost grows as `d^{n+1}`).
pub const DEFAULT_ORDER_CAP: usize = 6;

#[derive(Debug, Clone)]
pub struct HigherDerivativeRequest {
    pub f: ScalarFunction,
    pub a: Operator,
    pub b: Operator,
    pub order: usize,
}

impl HigherDerivativeRequest {
    pub fn new(f: ScalarFunction, a: Operator, b: Operator, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(QaError::InvalidArgument("derivative order must be at least 1".into()));
        }
        a.check_same_dim(&b)?;
        Ok(HigherDerivativeRequest { f, a, b, order })
    }
}

/// Evaluates chain sums for a fixed `f`, `A` and `B`, caching divided
/// differences by index multiset.
struct ChainEvaluator<'a> {
    f: &'a ScalarFunction,
    spectrum: &'a Spectrum,
    bt: DMatrix<C64>,
    threshold: f64,
    cache: HashMap<Vec<u16>, f64>,
}

impl<'a> ChainEvaluator<'a> {
    fn new(f: &'a ScalarFunction, spectrum: &'a Spectrum, b: &Operator) -> Self {
        ChainEvaluator {
            f,
            spectrum,
            bt: spectrum.to_eigenbasis(b),
            threshold: split_threshold(spectrum, DEFAULT_SPLIT_RTOL),
            cache: HashMap::new(),
        }
    }

    fn divided_difference(&mut self, chain: &[usize]) -> f64 {
        let mut key: Vec<u16> = chain.iter().map(|&i| i as u16).collect();
        key.sort_unstable();
        if let Some(&v) = self.cache.get(&key) {
            return v;
        }
        let l = self.spectrum.eigenvalues();
        let nodes: Vec<f64> = key.iter().map(|&i| l[i as usize]).collect();
        let v = divided_difference(self.f, &nodes, self.threshold);
        self.cache.insert(key, v);
        v
    }

    /// Eigenbasis matrix of `sum f[chain] prod B` (without the `n!`).
    fn chain_sum(&mut self, n: usize) -> DMatrix<C64> {
        let d = self.spectrum.dim();
        let mut out = DMatrix::zeros(d, d);
        let mut chain = vec![0usize; n + 1];
        for i0 in 0..d {
            chain[0] = i0;
            self.descend(1, n, c64(1.0, 0.0), &mut chain, &mut out);
        }
        out
    }

    fn descend(&mut self, depth: usize, n: usize, prod: C64, chain: &mut Vec<usize>, out: &mut DMatrix<C64>) {
        let d = self.spectrum.dim();
        let prev = chain[depth - 1];
        for i in 0..d {
            let p = prod * self.bt[(prev, i)];
            if p == C64::default() {
                continue;
            }
            chain[depth] = i;
            if depth == n {
                let dd = self.divided_difference(chain);
                out[(chain[0], i)] += p * dd;
            } else {
                self.descend(depth + 1, n, p, chain, out);
            }
        }
    }
}

fn hermitian_spectrum(a: &Operator) -> Result<Spectrum> {
    Spectrum::decompose(a, HERMITIAN_RTOL)
}

fn check_order(order: usize, cap: usize) -> Result<()> {
    if order > cap {
        Err(QaError::InvalidArgument(format!("derivative order {order} exceeds the configured cap {cap}")))
    } else {
        Ok(())
    }
}

/// `d^n f(A)/dA^n : B^n` with the default order cap.
pub fn higher_derivative_apply(req: &HigherDerivativeRequest) -> Result<Operator> {
    higher_derivative_apply_capped(req, DEFAULT_ORDER_CAP)
}

pub fn higher_derivative_apply_capped(req: &HigherDerivativeRequest, cap: usize) -> Result<Operator> {
    check_order(req.order, cap)?;
    let s = hermitian_spectrum(&req.a)?;
    s.check_domain(&req.f)?;
    let mut ev = ChainEvaluator::new(&req.f, &s, &req.b);
    let m = ev.chain_sum(req.order) * c64(factorial(req.order), 0.0);
    Ok(s.from_eigenbasis(&m))
}

/// The terms `x^n/n! d^n f(A)/dA^n : B^n` for `n = 0..=N`.
pub fn taylor_terms(f: &ScalarFunction, a: &Operator, b: &Operator, x: f64, order: usize) -> Result<Vec<Operator>> {
    taylor_terms_capped(f, a, b, x, order, DEFAULT_ORDER_CAP)
}

pub fn taylor_terms_capped(
    f: &ScalarFunction,
    a: &Operator,
    b: &Operator,
    x: f64,
    order: usize,
    cap: usize,
) -> Result<Vec<Operator>> {
    check_order(order, cap)?;
    a.check_same_dim(b)?;
    let s = hermitian_spectrum(a)?;
    s.check_domain(f)?;
    if b.is_hermitian() {
        let shifted = (a + b.scale_real(x)).hermitian_part();
        hermitian_spectrum(&shifted)?.check_domain(f)?;
    }
    let mut terms = vec![s.apply(f)?];
    let mut ev = ChainEvaluator::new(f, &s, b);
    for n in 1..=order {
        // x^n/n! * n! * chain sum
        let m = ev.chain_sum(n) * c64(x.powi(n as i32), 0.0);
        terms.push(s.from_eigenbasis(&m));
    }
    Ok(terms)
}

/// Partial sum of `f(A + xB) = sum x^n/n! d^n f(A)/dA^n : B^n` through `n = N`.
pub fn taylor_sum(f: &ScalarFunction, a: &Operator, b: &Operator, x: f64, order: usize) -> Result<Operator> {
    let terms = taylor_terms(f, a, b, x, order)?;
    Ok(terms.into_iter().fold(Operator::zeros(a.dim()), |acc, t| acc + t))
}

/// Expansion of `e^{-beta (H - h Q)}` in powers of the field `h`.
#[derive(Debug, Clone)]
pub struct NonlinearResponse {
    /// `terms[n]` is the order-`n` response.
    pub terms: Vec<Operator>,
    pub sum: Operator,
}

pub fn nonlinear_response_density(
    h: &Operator,
    q: &Operator,
    beta: f64,
    field: f64,
    order: usize,
) -> Result<NonlinearResponse> {
    if !(beta > 0.0) {
        return Err(QaError::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    q.check_hermitian(HERMITIAN_RTOL)?;
    let terms = taylor_terms(&ScalarFunction::exp_scaled(-beta), h, q, -field, order)?;
    let sum = terms.iter().fold(Operator::zeros(h.dim()), |acc, t| acc + t);
    Ok(NonlinearResponse { terms, sum })
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Order-`m` terms of the second-derivative series, `m = 0..=M`:
///
/// `2 (-1)^m/(m+2)! f^{(m+2)}(A) sum_{q=0}^{m} C(m+1, q+1) (delta_A^{m-q} B)(delta_A^q B)`,
///
/// which is the telescoped polynomial `sum_k (delta_1 + delta_2)^k delta_1^{m-k}`
/// applied to `B . B`.
pub fn formula_a_d2_terms(f: &ScalarFunction, a: &Operator, b: &Operator, order: usize) -> Result<Vec<Operator>> {
    a.check_same_dim(b)?;
    let s = hermitian_spectrum(a)?;
    s.check_domain(f)?;
    let l = s.eigenvalues().to_vec();
    let d = s.dim();
    let bt = s.to_eigenbasis(b);
    // powers[p] = delta^p B in the eigenbasis
    let mut powers = vec![bt.clone()];
    for p in 1..=order {
        let prev = &powers[p - 1];
        powers.push(DMatrix::from_fn(d, d, |i, j| prev[(i, j)] * (l[i] - l[j])));
    }
    let mut terms = Vec::with_capacity(order + 1);
    for m in 0..=order {
        let mut poly = DMatrix::<C64>::zeros(d, d);
        for q in 0..=m {
            poly += (&powers[m - q] * &powers[q]) * c64(binomial(m + 1, q + 1), 0.0);
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let w = 2.0 * sign / factorial(m + 2);
        let scaled = DMatrix::from_fn(d, d, |i, j| poly[(i, j)] * (w * f.derivative(m + 2, l[i])));
        terms.push(s.from_eigenbasis(&scaled));
    }
    Ok(terms)
}

/// Truncated second-derivative series through order `M`.
pub fn formula_a_d2(f: &ScalarFunction, a: &Operator, b: &Operator, order: usize) -> Result<Operator> {
    Ok(formula_a_d2_terms(f, a, b, order)?.into_iter().fold(Operator::zeros(a.dim()), |acc, t| acc + t))
}

/// Roots `||T_m||^{1/m}`, `m = 1..=m_max`, of the order-`m` terms of the
/// expansion of `d^n f(A) : B^n` about `A`, where
/// `T_m = f^{(n+m)}(A)/m! int_simplex (sum_j t_j delta_j)^m : B^n`.
///
/// In the eigenbasis the simplex integral reduces to
/// `(-1)^m m!/(n+m)! h_m(l_{i_1} - l_{i_0}, .., l_{i_n} - l_{i_0})`.
pub fn alpha_n_estimate(f: &ScalarFunction, a: &Operator, b: &Operator, n: usize, m_max: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(QaError::InvalidArgument("derivative order must be at least 1".into()));
    }
    a.check_same_dim(b)?;
    let s = hermitian_spectrum(a)?;
    s.check_domain(f)?;
    let l = s.eigenvalues().to_vec();
    let d = s.dim();
    let bt = s.to_eigenbasis(b);
    let mut mats = vec![DMatrix::<C64>::zeros(d, d); m_max + 1];
    let mut chain = vec![0usize; n + 1];
    let total = d.pow(n as u32 + 1);
    for code in 0..total {
        let mut c = code;
        for slot in chain.iter_mut() {
            *slot = c % d;
            c /= d;
        }
        let mut prod = c64(1.0, 0.0);
        for k in 0..n {
            prod *= bt[(chain[k], chain[k + 1])];
        }
        if prod == C64::default() {
            continue;
        }
        let i0 = chain[0];
        let ys: Vec<f64> = chain.iter().map(|&i| l[i] - l[i0]).collect();
        let h = complete_homogeneous(&ys, m_max);
        for m in 1..=m_max {
            let w = f.derivative(n + m, l[i0]) / factorial(n + m) * h[m];
            mats[m][(i0, chain[n])] += prod * w;
        }
    }
    Ok((1..=m_max)
        .map(|m| operator_norm(&Operator::from_square(mats[m].clone())).powf(1.0 / m as f64))
        .collect())
}
