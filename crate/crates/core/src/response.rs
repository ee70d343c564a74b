//! Equilibrium linear response: dressed currents, Kubo's canonical
//! correlation, the conductivity `sigma(omega)` in several equivalent forms,
//! and the decomposition of a current into conserved and energy-off-diagonal
//! parts.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QaError, Result};
use crate::hyperop::{exprel, DividedDifferenceKernel};
use crate::nonequilibrium::{DrivenSystem, ForceProtocol, SeriesQuadrature, Waveform};
use crate::operator::{c64, Operator, C64, HERMITIAN_RTOL};
use crate::quad::gauss_legendre_panels;
use crate::spectrum::Spectrum;

/// Relative threshold defining energy-degenerate blocks.
pub const DEGENERACY_RTOL: f64 = 1e-9;

/// Hamiltonian, current and thermal parameters. The current is shifted at
/// construction so that its thermal average vanishes.
#[derive(Debug, Clone)]
pub struct ResponseSetup {
    h: Operator,
    j: Operator,
    displacement: Option<Operator>,
    beta: f64,
    epsilon: f64,
    hbar: f64,
    spectrum: Spectrum,
    /// Boltzmann weights `e^{-beta E_n}/Z` in ascending energy order.
    weights: Vec<f64>,
    /// `J` in the eigenbasis of `H`.
    j_eig: DMatrix<C64>,
}

impl ResponseSetup {
    pub fn new(h: &Operator, j: &Operator, beta: f64, epsilon: f64, hbar: f64) -> Result<Self> {
        Self::build(h, j, None, beta, epsilon, hbar)
    }

    /// Current `J = dA/dt = (1/i hbar)[A, H]` of a displacement `A`.
    pub fn from_displacement(h: &Operator, a: &Operator, beta: f64, epsilon: f64, hbar: f64) -> Result<Self> {
        h.check_same_dim(a)?;
        a.check_hermitian(HERMITIAN_RTOL)?;
        let j = a.commutator(h).scale(c64(0.0, -1.0 / hbar)).hermitian_part();
        Self::build(h, &j, Some(a.hermitian_part()), beta, epsilon, hbar)
    }

    fn build(h: &Operator, j: &Operator, a: Option<Operator>, beta: f64, epsilon: f64, hbar: f64) -> Result<Self> {
        h.check_same_dim(j)?;
        j.check_hermitian(HERMITIAN_RTOL)?;
        for (name, v) in [("beta", beta), ("epsilon", epsilon), ("hbar", hbar)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(QaError::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let spectrum = Spectrum::decompose(h, HERMITIAN_RTOL)?;
        let e0 = spectrum.min_eigenvalue();
        let raw: Vec<f64> = spectrum.eigenvalues().iter().map(|e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / z).collect();
        let mut j_eig = spectrum.to_eigenbasis(&j.hermitian_part());
        let mean: f64 = (0..weights.len()).map(|n| weights[n] * j_eig[(n, n)].re).sum();
        for n in 0..weights.len() {
            j_eig[(n, n)] -= c64(mean, 0.0);
        }
        let j = spectrum.from_eigenbasis(&j_eig).hermitian_part();
        Ok(ResponseSetup { h: h.hermitian_part(), j, displacement: a, beta, epsilon, hbar, spectrum, weights, j_eig })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(QaError::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(ResponseSetup { epsilon, ..self.clone() })
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    /// The mean-subtracted current.
    pub fn current(&self) -> &Operator {
        &self.j
    }

    pub fn displacement(&self) -> Option<&Operator> {
        self.displacement.as_ref()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `e^{-beta H}/Z`.
    pub fn thermal_state(&self) -> Operator {
        let d = self.weights.len();
        self.spectrum
            .from_eigenbasis(&DMatrix::from_fn(d, d, |i, k| if i == k { c64(self.weights[i], 0.0) } else { C64::default() }))
    }

    /// Thermal average `Tr(rho X)`.
    pub fn average(&self, x: &Operator) -> C64 {
        let xe = self.spectrum.to_eigenbasis(x);
        (0..self.weights.len()).map(|n| xe[(n, n)] * self.weights[n]).sum()
    }

    fn energy(&self, n: usize) -> f64 {
        self.spectrum.eigenvalues()[n]
    }

    /// Terms `(w_n K_nm |J_nm|^2, (E_m - E_n)/hbar)` of the Lehmann sums.
    fn lehmann_terms(&self) -> Vec<(f64, f64)> {
        let d = self.weights.len();
        let mut out = Vec::with_capacity(d * d);
        for n in 0..d {
            for m in 0..d {
                let amp = self.j_eig[(n, m)].norm_sqr();
                if amp == 0.0 {
                    continue;
                }
                let k = exprel(self.beta * (self.energy(n) - self.energy(m)));
                out.push((self.weights[n] * k * amp, (self.energy(m) - self.energy(n)) / self.hbar));
            }
        }
        out
    }

    fn degeneracy_threshold(&self) -> f64 {
        DEGENERACY_RTOL * self.spectrum.source_norm().max(1.0)
    }
}

/// `Delta(beta H) J = (1/beta) int_0^beta e^{lambda H} J e^{-lambda H} d lambda`.
pub fn dressed_current(setup: &ResponseSetup) -> Result<Operator> {
    DividedDifferenceKernel::delta(&setup.spectrum, setup.beta).apply(&setup.j)
}

/// `<J : J(t)> = <(Delta(beta H) J) J(t)>` with `J(t) = e^{itH/hbar} J e^{-itH/hbar}`.
pub fn canonical_correlation(setup: &ResponseSetup, t: f64) -> C64 {
    setup.lehmann_terms().iter().map(|&(w, x)| C64::from_polar(w, x * t)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConductivityMethod {
    Resolvent,
    Series(usize),
    TimeIntegral,
    LargeOmega,
}

impl ConductivityMethod {
    pub fn label(&self) -> String {
        match self {
            ConductivityMethod::Resolvent => "resolvent".into(),
            ConductivityMethod::Series(n) => format!("series({n})"),
            ConductivityMethod::TimeIntegral => "time-integral".into(),
            ConductivityMethod::LargeOmega => "large-omega".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductivityResult {
    pub omega: f64,
    pub sigma: C64,
    pub method: ConductivityMethod,
}

/// `sigma(omega) = beta sum_{nm} w_n K_nm |J_nm|^2 / (eps + i(omega - (E_m - E_n)/hbar))`.
pub fn conductivity(setup: &ResponseSetup, omega: f64) -> ConductivityResult {
    let sigma: C64 = setup
        .lehmann_terms()
        .iter()
        .map(|&(w, x)| c64(setup.beta * w, 0.0) / c64(setup.epsilon, omega - x))
        .sum();
    ConductivityResult { omega, sigma, method: ConductivityMethod::Resolvent }
}

/// Settings for the direct time quadrature of `beta int_0^inf <J:J(t)> e^{-(eps + i omega) t} dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeQuadrature {
    /// The integral is cut where `e^{-eps T}` drops below this.
    pub tail: f64,
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Panel width in units of the fastest period `2 pi / max frequency`.
    pub panel_periods: f64,
}

impl Default for TimeQuadrature {
    fn default() -> Self {
        TimeQuadrature { tail: 1e-16, nodes: 16, panel_periods: 0.5 }
    }
}

pub fn conductivity_time_integral(setup: &ResponseSetup, omega: f64, q: &TimeQuadrature) -> Result<ConductivityResult> {
    let t_max = -q.tail.ln() / setup.epsilon;
    let fastest = setup.lehmann_terms().iter().fold(0.0f64, |m, &(_, x)| m.max((x - omega).abs())).max(setup.epsilon);
    let width = q.panel_periods * 2.0 * std::f64::consts::PI / fastest;
    let panels = (t_max / width).ceil().max(1.0) as usize;
    let pts = gauss_legendre_panels(q.nodes, 0.0, t_max, panels)?;
    let mut sigma = C64::default();
    for (t, w) in pts {
        let kernel = C64::from_polar((-setup.epsilon * t).exp(), -omega * t);
        sigma += canonical_correlation(setup, t) * kernel * w;
    }
    Ok(ConductivityResult { omega, sigma: sigma * setup.beta, method: ConductivityMethod::TimeIntegral })
}

/// Largest `|E_m - E_n|` over pairs connected by the current.
pub fn current_spread(setup: &ResponseSetup) -> f64 {
    setup.lehmann_terms().iter().fold(0.0f64, |m, &(_, x)| m.max(x.abs() * setup.hbar))
}

/// Partial sum through `N` of
/// `(beta / i z) sum_n <(Delta(beta H) J) [((1/hbar z) delta_H)^n J]>`
/// with the regularized frequency `z = omega - i eps`. Errors with
/// [`QaError::DivergenceWarning`] when the term ratio `spread/(hbar |z|)`
/// reaches 1.
pub fn conductivity_series(setup: &ResponseSetup, omega: f64, order: usize) -> Result<ConductivityResult> {
    let z = c64(omega, -setup.epsilon);
    let ratio = current_spread(setup) / (setup.hbar * z.norm());
    if ratio >= 1.0 {
        return Err(QaError::DivergenceWarning { ratio });
    }
    let dressed = dressed_current(setup)?;
    let rho = setup.thermal_state();
    let left = &rho * &dressed;
    let step = c64(1.0, 0.0) / (z * setup.hbar);
    let mut x = setup.j.clone();
    let mut total = C64::default();
    for n in 0..=order {
        if n > 0 {
            x = setup.h.commutator(&x).scale(step);
        }
        total += (&left * &x).trace();
    }
    let sigma = total * setup.beta / (c64(0.0, 1.0) * z);
    Ok(ConductivityResult { omega, sigma, method: ConductivityMethod::Series(order) })
}

/// `beta <(Delta(beta H) J) J> / (i omega)`, the leading large-frequency behaviour.
pub fn conductivity_large_omega(setup: &ResponseSetup, omega: f64) -> ConductivityResult {
    let sigma = canonical_correlation(setup, 0.0) * setup.beta / c64(0.0, omega);
    ConductivityResult { omega, sigma, method: ConductivityMethod::LargeOmega }
}

/// `J = sum_j a_j H_j + J'`.
#[derive(Debug, Clone)]
pub struct ErgodicDecomposition {
    pub coefficients: Vec<f64>,
    /// `<H_j^2>` of the mean-subtracted constants.
    pub norms: Vec<f64>,
    pub j_prime: Operator,
    /// Norm of the energy-diagonal remainder removed from `J'`.
    pub projection_norm: f64,
}

impl ErgodicDecomposition {
    /// `beta sum_j a_j^2 <H_j^2>`.
    pub fn drude_weight(&self, beta: f64) -> f64 {
        beta * self.coefficients.iter().zip(&self.norms).map(|(a, n)| a * a * n).sum::<f64>()
    }
}

/// Splits the current into components along the conserved `constants`
/// (thermal averages subtracted) and a remainder that is off-diagonal in
/// energy.
pub fn ergodic_decomposition(setup: &ResponseSetup, constants: &[Operator]) -> Result<ErgodicDecomposition> {
    let h_norm = setup.h.norm().max(1.0);
    let mut centered = Vec::with_capacity(constants.len());
    for (index, c) in constants.iter().enumerate() {
        setup.h.check_same_dim(c)?;
        c.check_hermitian(HERMITIAN_RTOL)?;
        let norm = c.commutator(&setup.h).norm();
        if norm > 1e-9 * h_norm * c.norm().max(1.0) {
            return Err(QaError::NotConserved { index, norm });
        }
        let mean = setup.average(c).re;
        centered.push((c - Operator::identity(c.dim()).scale_real(mean)).hermitian_part());
    }
    let gram: Vec<Vec<f64>> =
        centered.iter().map(|a| centered.iter().map(|b| setup.average(&(a * b)).re).collect()).collect();
    for j in 0..centered.len() {
        if gram[j][j] <= 0.0 {
            return Err(QaError::InvalidArgument(format!("constant {j} has zero thermal variance")));
        }
        for k in 0..j {
            let scale = (gram[j][j] * gram[k][k]).sqrt();
            if gram[j][k].abs() > 1e-9 * scale {
                return Err(QaError::NotOrthogonal { j: k, k: j, overlap: gram[j][k] });
            }
        }
    }
    let mut j_prime = setup.j.clone();
    let mut coefficients = Vec::with_capacity(centered.len());
    for (c, g) in centered.iter().zip(&gram).map(|(c, row)| (c, row)) {
        let idx = coefficients.len();
        let a = setup.average(&(&setup.j * c)).re / g[idx];
        j_prime -= &c.scale_real(a);
        coefficients.push(a);
    }
    let norms = (0..centered.len()).map(|j| gram[j][j]).collect();
    let mut je = setup.spectrum.to_eigenbasis(&j_prime);
    let thr = setup.degeneracy_threshold();
    let d = setup.weights.len();
    let mut removed = DMatrix::<C64>::zeros(d, d);
    for n in 0..d {
        for m in 0..d {
            if (setup.energy(n) - setup.energy(m)).abs() <= thr {
                removed[(n, m)] = je[(n, m)];
                je[(n, m)] = C64::default();
            }
        }
    }
    Ok(ErgodicDecomposition {
        coefficients,
        norms,
        j_prime: setup.spectrum.from_eigenbasis(&je).hermitian_part(),
        projection_norm: removed.norm(),
    })
}

/// Fit `sigma(0; eps) = C/eps + D`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceScan {
    pub slope: f64,
    pub finite_part: f64,
    pub epsilons: Vec<f64>,
    pub sigma0: Vec<f64>,
}

/// Evaluates `Re sigma(0)` at each regularization in `eps_list` (strictly
/// descending, positive) and least-squares fits `C/eps + D`.
pub fn sigma0_divergence_scan(setup: &ResponseSetup, eps_list: &[f64]) -> Result<DivergenceScan> {
    if eps_list.len() < 2 {
        return Err(QaError::FitFailure("need at least two regularization values".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(QaError::FitFailure("regularization values must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(QaError::FitFailure("regularization values must be strictly descending".into()));
    }
    let sigma0: Vec<f64> = eps_list
        .iter()
        .map(|&e| setup.with_epsilon(e).map(|s| conductivity(&s, 0.0).sigma.re))
        .collect::<Result<_>>()?;
    let n = eps_list.len() as f64;
    let u: Vec<f64> = eps_list.iter().map(|e| 1.0 / e).collect();
    let ubar = u.iter().sum::<f64>() / n;
    let ybar = sigma0.iter().sum::<f64>() / n;
    let suu: f64 = u.iter().map(|x| (x - ubar).powi(2)).sum();
    let suy: f64 = u.iter().zip(&sigma0).map(|(x, y)| (x - ubar) * (y - ybar)).sum();
    let slope = suy / suu;
    let finite_part = ybar - slope * ubar;
    if !slope.is_finite() || !finite_part.is_finite() {
        return Err(QaError::FitFailure("least-squares fit is degenerate".into()));
    }
    Ok(DivergenceScan { slope, finite_part, epsilons: eps_list.to_vec(), sigma0 })
}

/// `<J>_t = Tr(Delta rho(t) J)` with the first-order density change
/// `Delta rho = -rho_eq Delta(beta H) eta_1(t)`. The setup must carry the
/// displacement `A` that the force couples to; `J` is its current.
pub fn linear_response_average(
    setup: &ResponseSetup,
    protocol: &ForceProtocol,
    t: f64,
    q: &SeriesQuadrature,
) -> Result<f64> {
    let a = setup
        .displacement
        .as_ref()
        .ok_or_else(|| QaError::InvalidArgument("linear response needs the displacement operator A".into()))?;
    if let Waveform::Cosine { .. } = protocol.waveform() {
        if (protocol.epsilon() - setup.epsilon).abs() > 1e-12 * setup.epsilon {
            return Err(QaError::InvalidArgument("force and setup must share the same epsilon".into()));
        }
    }
    let sys = DrivenSystem::new(&setup.h, a, setup.hbar)?;
    let eta1 = sys.eta1(protocol, setup.beta, t, q)?;
    let dressed = DividedDifferenceKernel::delta(&setup.spectrum, setup.beta).apply(&eta1)?;
    let drho = -(setup.thermal_state() * dressed);
    Ok((drho * &setup.j).trace().re)
}

/// `Re(sigma(omega) F e^{i omega t})`.
pub fn kubo_prediction(setup: &ResponseSetup, amplitude: f64, omega: f64, t: f64) -> f64 {
    (conductivity(setup, omega).sigma * C64::from_polar(amplitude, omega * t)).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::operator_norm;

    fn sigma(k: usize) -> Operator {
        match k {
            1 => Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap(),
            2 => Operator::from_rows(&[&[c64(0.0, 0.0), c64(0.0, -1.0)], &[c64(0.0, 1.0), c64(0.0, 0.0)]]).unwrap(),
            _ => Operator::from_real_diagonal(&[1.0, -1.0]),
        }
    }

    #[test]
    fn thermal_mean_is_subtracted() {
        let s = ResponseSetup::new(&sigma(3), &(sigma(3) + sigma(1)), 0.7, 0.1, 1.0).unwrap();
        assert!(s.average(s.current()).norm() < 1e-15);
    }

    #[test]
    fn dressed_current_examples() {
        let beta = 2.0;
        let h = Operator::from_real_diagonal(&[1.0 / beta, 2.0 / beta]);
        let s = ResponseSetup::new(&h, &sigma(1), beta, 0.1, 1.0).unwrap();
        let d = dressed_current(&s).unwrap();
        assert!((d.get(0, 1).re - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((d.get(1, 0).re - 1f64.exp_m1()).abs() < 1e-15);
        let commuting = ResponseSetup::new(&h, &sigma(3), beta, 0.1, 1.0).unwrap();
        let dc = dressed_current(&commuting).unwrap();
        assert!(operator_norm(&(dc - commuting.current())) < 1e-15);
        let hot = ResponseSetup::new(&sigma(3), &sigma(1), 1e-6, 0.1, 1.0).unwrap();
        assert!(operator_norm(&(dressed_current(&hot).unwrap() - hot.current())) < 1e-5);
    }

    #[test]
    fn correlation_lehmann_and_symmetry() {
        let s = ResponseSetup::new(&sigma(3), &sigma(1), 1.0, 0.1, 1.0).unwrap();
        let c0 = canonical_correlation(&s, 0.0);
        // two-level: w_+ K(+,-) + w_- K(-,+) with energies +1, -1
        let (ep, em) = (1.0f64, -1.0f64);
        let z = (-ep).exp() + (-em).exp();
        let lehmann = (-ep).exp() / z * exprel(ep - em) + (-em).exp() / z * exprel(em - ep);
        assert!((c0.re - lehmann).abs() < 1e-15 && c0.im.abs() < 1e-15);
        for t in [0.3, 1.7, 12.0] {
            let a = canonical_correlation(&s, t);
            let b = canonical_correlation(&s, -t);
            assert!((a - b.conj()).norm() < 1e-14);
            assert!(a.norm() <= c0.re + 1e-14);
        }
    }

    #[test]
    fn drude_pole_for_conserved_current() {
        let h = Operator::from_real_diagonal(&[0.0, 1.0, 3.0]);
        let j = Operator::from_real_diagonal(&[1.0, -0.5, 2.0]);
        for eps in [1e-2, 1e-3] {
            let s = ResponseSetup::new(&h, &j, 0.8, eps, 1.0).unwrap();
            let jj = s.average(&(s.current() * s.current())).re;
            let sig = conductivity(&s, 0.0).sigma;
            assert!((sig.re - 0.8 * jj / eps).abs() < 1e-10 * sig.re);
        }
    }

    #[test]
    fn resolvent_matches_time_integral() {
        let s = ResponseSetup::new(&sigma(3), &sigma(2), 1.0, 0.2, 1.0).unwrap();
        for omega in [0.0, 1.0, 2.0, 3.5] {
            let a = conductivity(&s, omega).sigma;
            let b = conductivity_time_integral(&s, omega, &TimeQuadrature::default()).unwrap().sigma;
            assert!((a - b).norm() < 1e-10, "{omega}: {a} vs {b}");
        }
    }

    #[test]
    fn series_and_large_omega() {
        let s = ResponseSetup::new(&sigma(3), &sigma(2), 1.0, 0.05, 1.0).unwrap();
        let omega = 20.0;
        let exact = conductivity(&s, omega).sigma;
        let series = conductivity_series(&s, omega, 12).unwrap().sigma;
        assert!((exact - series).norm() < 1e-8);
        let lead = conductivity_series(&s, omega, 0).unwrap().sigma;
        let expected = canonical_correlation(&s, 0.0) * s.beta() / c64(s.epsilon(), omega);
        assert!((lead - expected).norm() < 1e-15);
        assert!(matches!(conductivity_series(&s, 1.0, 4), Err(QaError::DivergenceWarning { .. })));
    }

    #[test]
    fn decomposition_examples() {
        let h = sigma(3);
        let s = ResponseSetup::new(&h, &h, 1.0, 0.1, 1.0).unwrap();
        let d = ergodic_decomposition(&s, &[h.clone()]).unwrap();
        assert!((d.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(operator_norm(&d.j_prime) < 1e-12);
        let mixed = h.scale_real(0.7) + sigma(2).scale_real(0.4);
        let s = ResponseSetup::new(&h, &mixed, 1.0, 0.1, 1.0).unwrap();
        let d = ergodic_decomposition(&s, &[h.clone()]).unwrap();
        assert!((d.coefficients[0] - 0.7).abs() < 1e-10);
        assert!(d.projection_norm < 1e-12);
        let s = ResponseSetup::new(&h, &sigma(1), 1.0, 0.1, 1.0).unwrap();
        let d = ergodic_decomposition(&s, &[h.clone()]).unwrap();
        assert!(d.coefficients[0].abs() < 1e-15);
        assert!(operator_norm(&(d.j_prime - sigma(1))) < 1e-15);
        assert!(matches!(ergodic_decomposition(&s, &[sigma(1)]), Err(QaError::NotConserved { .. })));
    }

    #[test]
    fn scan_input_validation() {
        let s = ResponseSetup::new(&sigma(3), &sigma(3), 1.0, 0.1, 1.0).unwrap();
        assert!(sigma0_divergence_scan(&s, &[0.1]).is_err());
        assert!(sigma0_divergence_scan(&s, &[0.01, 0.1]).is_err());
        let scan = sigma0_divergence_scan(&s, &[0.1, 0.01, 0.001]).unwrap();
        let expected = s.average(&(s.current() * s.current())).re;
        assert!((scan.slope - expected).abs() < 1e-9);
    }
}
