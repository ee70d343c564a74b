//! Driven closed systems: von Neumann evolution, invariance of `f(rho(t))`,
//! and the perturbation series of the entropy operator
//! `eta(t) = Phi + beta H + eta'(t)`, `eta' = eta_1 + eta_2 + ...`, under
//! `H(t) = H - A F(t)`.
//!
//! The force enters everywhere through its switched form
//! `F(u) e^{eps (u - t)}`, with `t` the time at which the entropy operator is
//! requested; the lower limit `-infinity` is replaced by `t_start`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QaError, Result};
use crate::operator::{c64, Operator, C64, HERMITIAN_RTOL};
use crate::propagator::{magnus4_step, rk4_step, with_step_halving, StepControl};
use crate::quad::{richardson, UniformGrid};
use crate::scalar_fn::ScalarFunction;
use crate::spectrum::Spectrum;

/// Largest admissible `e^{eps * t_start}`.
pub const SWITCH_TAIL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    /// Constant amplitude after the adiabatic switch-on.
    Step,
    Cosine { omega: f64 },
}

/// External force `F(t)` coupled as `H(t) = H - A F(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ForceProtocolJson", into = "ForceProtocolJson")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[cfg_attr(feature = "schema", schemars(with = "ForceProtocolJson"))]
pub struct ForceProtocol {
    amplitude: f64,
    waveform: Waveform,
    epsilon: f64,
    t_start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "lowercase")]
enum WaveformTag {
    Step,
    Cos,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
struct ForceProtocolJson {
    amplitude: f64,
    waveform: WaveformTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    epsilon: f64,
    t_start: f64,
}

impl TryFrom<ForceProtocolJson> for ForceProtocol {
    type Error = QaError;

    fn try_from(j: ForceProtocolJson) -> Result<Self> {
        let waveform = match (j.waveform, j.omega) {
            (WaveformTag::Step, None) => Waveform::Step,
            (WaveformTag::Step, Some(_)) => {
                return Err(QaError::InvalidArgument("a step force takes no omega".into()));
            }
            (WaveformTag::Cos, Some(omega)) => Waveform::Cosine { omega },
            (WaveformTag::Cos, None) => return Err(QaError::InvalidArgument("a cos force needs omega".into())),
        };
        ForceProtocol::new(j.amplitude, waveform, j.epsilon, j.t_start)
    }
}

impl From<ForceProtocol> for ForceProtocolJson {
    fn from(p: ForceProtocol) -> Self {
        let (waveform, omega) = match p.waveform {
            Waveform::Step => (WaveformTag::Step, None),
            Waveform::Cosine { omega } => (WaveformTag::Cos, Some(omega)),
        };
        ForceProtocolJson { amplitude: p.amplitude, waveform, omega, epsilon: p.epsilon, t_start: p.t_start }
    }
}

impl ForceProtocol {
    pub fn new(amplitude: f64, waveform: Waveform, epsilon: f64, t_start: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(QaError::InvalidArgument(format!("switch-on rate must be positive, got {epsilon}")));
        }
        if !amplitude.is_finite() || !t_start.is_finite() {
            return Err(QaError::InvalidArgument("force parameters must be finite".into()));
        }
        if let Waveform::Cosine { omega } = waveform {
            if !omega.is_finite() {
                return Err(QaError::InvalidArgument("omega must be finite".into()));
            }
        }
        let tail = (epsilon * t_start).exp();
        if tail > SWITCH_TAIL {
            return Err(QaError::InvalidArgument(format!(
                "t_start = {t_start} leaves a switch-on tail e^(eps t_start) = {tail:.3e} above {SWITCH_TAIL:.0e}"
            )));
        }
        Ok(ForceProtocol { amplitude, waveform, epsilon, t_start })
    }

    /// `t_start` chosen so that `e^{eps t_start}` equals the admissible tail.
    pub fn with_default_start(amplitude: f64, waveform: Waveform, epsilon: f64) -> Result<Self> {
        let t_start = SWITCH_TAIL.ln() / epsilon;
        ForceProtocol::new(amplitude, waveform, epsilon, t_start * (1.0 + 1e-12))
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn waveform(&self) -> Waveform {
        self.waveform
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        ForceProtocol { amplitude, ..*self }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        ForceProtocol::new(self.amplitude, self.waveform, epsilon, self.t_start.min(SWITCH_TAIL.ln() / epsilon))
    }

    /// Bare force `F(u)`.
    pub fn force(&self, u: f64) -> f64 {
        match self.waveform {
            Waveform::Step => self.amplitude,
            Waveform::Cosine { omega } => self.amplitude * (omega * u).cos(),
        }
    }

    /// `F(u) e^{eps (u - t_ref)}`.
    pub fn switched(&self, u: f64, t_ref: f64) -> f64 {
        self.force(u) * (self.epsilon * (u - t_ref)).exp()
    }

    /// Bound on the neglected switch-on tail relative to the force scale.
    pub fn truncation_tail(&self, t: f64) -> f64 {
        (self.epsilon * (self.t_start - t)).exp()
    }

    /// `H - A F(u) e^{eps (u - t_ref)}`.
    pub fn hamiltonian(&self, h: &Operator, a: &Operator, t_ref: f64) -> impl Fn(f64) -> Operator {
        let (h, a, p) = (h.clone(), a.clone(), *self);
        move |u| &h - a.scale_real(p.switched(u, t_ref))
    }
}

/// Time grid for trajectories: `start, start + dt, ..., end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(end >= start) {
            return Err(QaError::InvalidArgument(format!("bad time grid [{start}, {end}] with dt = {dt}")));
        }
        Ok(TimeGrid { start, end, dt })
    }

    pub fn uniform(&self) -> Result<UniformGrid> {
        UniformGrid::with_max_step(self.start, self.end, self.dt)
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        Ok(self.uniform()?.points())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodMeta {
    pub step: f64,
    pub substeps: usize,
    pub order: usize,
    pub integrator: &'static str,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub grid: Vec<f64>,
    pub states: Vec<Operator>,
    pub method: MethodMeta,
}

fn check_density(rho: &Operator) -> Result<()> {
    rho.check_hermitian(HERMITIAN_RTOL)?;
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(QaError::InvalidArgument(format!("density matrix must have unit trace, got {tr}")));
    }
    let s = Spectrum::decompose(rho, HERMITIAN_RTOL)?;
    if s.min_eigenvalue() < -1e-12 {
        return Err(QaError::DomainViolation(format!(
            "density matrix has a negative eigenvalue {:.3e}",
            s.min_eigenvalue()
        )));
    }
    Ok(())
}

/// Integrates `i hbar d rho/dt = [H(t), rho]` on `grid` with fourth-order
/// Magnus steps, halving the substep until the trajectory is converged.
pub fn von_neumann_evolve(
    hamiltonian: &dyn Fn(f64) -> Operator,
    rho0: &Operator,
    grid: &TimeGrid,
    hbar: f64,
    control: &StepControl,
) -> Result<EvolutionResult> {
    check_density(rho0)?;
    let ug = grid.uniform()?;
    let points = ug.points();
    let integrate = |substeps: usize| -> Result<Vec<Operator>> {
        let mut states = Vec::with_capacity(points.len());
        let mut rho = rho0.clone();
        states.push(rho.clone());
        for w in points.windows(2) {
            let h = (w[1] - w[0]) / substeps as f64;
            for k in 0..substeps {
                let u = magnus4_step(hamiltonian, w[0] + k as f64 * h, h, hbar)?;
                rho = (&u * &rho * u.adjoint()).hermitian_part();
            }
            states.push(rho.clone());
        }
        Ok(states)
    };
    let step = ug.step();
    with_step_halving(control, integrate, |states, substeps| EvolutionResult {
        grid: points.clone(),
        states,
        method: MethodMeta { step: step / substeps as f64, substeps, order: 4, integrator: "magnus4" },
    })
}

/// `max_k ||i hbar d f(rho)/dt - [H(t_k), f(rho_k)]||` over grid points with
/// two neighbours on each side, the derivative taken by the five-point
/// stencil (the grid is uniform).
pub fn verify_formula3(
    f: &ScalarFunction,
    evo: &EvolutionResult,
    hamiltonian: &dyn Fn(f64) -> Operator,
    hbar: f64,
) -> Result<f64> {
    if evo.grid.len() < 5 {
        return Err(QaError::InvalidArgument("the derivative stencil needs at least five grid points".into()));
    }
    let values: Vec<Operator> = evo
        .states
        .iter()
        .map(|rho| Spectrum::decompose(rho, HERMITIAN_RTOL)?.apply(f))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for k in 2..values.len() - 2 {
        let h = 0.25 * (evo.grid[k + 2] - evo.grid[k - 2]);
        let diff = (&values[k + 1] - &values[k - 1]).scale_real(8.0) - (&values[k + 2] - &values[k - 2]);
        let deriv = diff.scale(c64(0.0, hbar / (12.0 * h)));
        let rhs = hamiltonian(evo.grid[k]).commutator(&values[k]);
        worst = worst.max((deriv - rhs).norm());
    }
    Ok(worst)
}

/// Quadrature settings for the entropy-operator series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesQuadrature {
    /// Largest trapezoid step on the coarse grid (the fine grid halves it).
    pub dt: f64,
    /// Cap on `order * grid points * dim^3`.
    pub cost_cap: f64,
}

impl Default for SeriesQuadrature {
    fn default() -> Self {
        SeriesQuadrature { dt: 0.01, cost_cap: 2e10 }
    }
}

/// `H`, its spectrum and the coupled operator `A`, with Heisenberg pictures
/// evaluated spectrally.
#[derive(Debug, Clone)]
pub struct DrivenSystem {
    spectrum: Spectrum,
    hamiltonian: Operator,
    coupling: Operator,
    /// `A` and `dA/dt = (1/i hbar)[A, H]` in the eigenbasis of `H`.
    a_eig: DMatrix<C64>,
    adot_eig: DMatrix<C64>,
    hbar: f64,
}

impl DrivenSystem {
    pub fn new(h: &Operator, a: &Operator, hbar: f64) -> Result<Self> {
        h.check_same_dim(a)?;
        a.check_hermitian(HERMITIAN_RTOL)?;
        if !(hbar > 0.0) {
            return Err(QaError::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        let spectrum = Spectrum::decompose(h, HERMITIAN_RTOL)?;
        let a_eig = spectrum.to_eigenbasis(a);
        let e = spectrum.eigenvalues();
        let d = spectrum.dim();
        // (1/i hbar)(A_mn E_n - E_m A_mn)
        let adot_eig = DMatrix::from_fn(d, d, |m, n| a_eig[(m, n)] * c64(0.0, (e[m] - e[n]) / hbar));
        Ok(DrivenSystem { spectrum, hamiltonian: h.hermitian_part(), coupling: a.hermitian_part(), a_eig, adot_eig, hbar })
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn coupling(&self) -> &Operator {
        &self.coupling
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `dA/dt = (1/i hbar)[A, H]`.
    pub fn adot(&self) -> Operator {
        self.spectrum.from_eigenbasis(&self.adot_eig)
    }

    fn phases(&self, s: f64) -> DMatrix<C64> {
        let e = self.spectrum.eigenvalues();
        let d = self.dim();
        DMatrix::from_fn(d, d, |m, n| C64::from_polar(1.0, s * (e[m] - e[n]) / self.hbar))
    }

    /// `e^{isH/hbar} X e^{-isH/hbar}` for `X` given in the eigenbasis.
    fn heisenberg(&self, x: &DMatrix<C64>, s: f64) -> DMatrix<C64> {
        x.component_mul(&self.phases(s))
    }

    pub fn a_at(&self, s: f64) -> Operator {
        self.spectrum.from_eigenbasis(&self.heisenberg(&self.a_eig, s))
    }

    pub fn adot_at(&self, s: f64) -> Operator {
        self.spectrum.from_eigenbasis(&self.heisenberg(&self.adot_eig, s))
    }

    fn check_budget(&self, order: usize, intervals: usize, q: &SeriesQuadrature) -> Result<()> {
        let d = self.dim() as f64;
        let requested = order as f64 * 3.0 * intervals as f64 * d * d * d;
        if requested > q.cost_cap {
            Err(QaError::QuadratureBudgetExceeded { requested, cap: q.cost_cap })
        } else {
            Ok(())
        }
    }

    /// Nested cumulative trapezoid evaluation of `eta_n(t)` on one grid of
    /// relative times `s` in `[t_start - t, 0]` (eigenbasis).
    fn eta_n_on_grid(&self, p: &ForceProtocol, t: f64, n: usize, grid: &UniformGrid) -> DMatrix<C64> {
        let pts = grid.points();
        let h = grid.step();
        let d = self.dim();
        let force: Vec<f64> = pts.iter().map(|&s| p.switched(t + s, t)).collect();
        let phases: Vec<DMatrix<C64>> = pts.iter().map(|&s| self.phases(s)).collect();
        // innermost integrand F(s) Adot(s)
        let mut integrand: Vec<DMatrix<C64>> =
            phases.iter().zip(&force).map(|(ph, &f)| self.adot_eig.component_mul(ph) * c64(f, 0.0)).collect();
        for _ in 1..n {
            // G(s) = F(s) [A(s), int_{s_0}^{s} integrand]
            let mut acc = DMatrix::<C64>::zeros(d, d);
            let mut next = Vec::with_capacity(pts.len());
            for k in 0..pts.len() {
                if k > 0 {
                    acc += (&integrand[k - 1] + &integrand[k]) * c64(0.5 * h, 0.0);
                }
                let a_s = self.a_eig.component_mul(&phases[k]);
                let comm = &a_s * &acc - &acc * &a_s;
                next.push(comm * c64(force[k], 0.0));
            }
            integrand = next;
        }
        let mut total = DMatrix::<C64>::zeros(d, d);
        for k in 0..pts.len() {
            let w = if k == 0 || k + 1 == pts.len() { 0.5 * h } else { h };
            total += &integrand[k] * c64(w, 0.0);
        }
        total
    }

    /// `eta_n(t) = -beta (-1/i hbar)^{n-1} int_{t1 > .. > tn} F(t1)..F(tn)
    ///   [A(t1), [A(t2), .., [A(t_{n-1}), Adot(t_n)]]]`, all times relative
    /// to `t` in `[t_start - t, 0]`.
    pub fn eta_n(&self, p: &ForceProtocol, beta: f64, t: f64, n: usize, q: &SeriesQuadrature) -> Result<Operator> {
        if n == 0 {
            return Err(QaError::InvalidArgument("entropy-operator order must be at least 1".into()));
        }
        if t < p.t_start() {
            return Err(QaError::InvalidArgument(format!("t = {t} precedes t_start = {}", p.t_start())));
        }
        let coarse = UniformGrid::with_max_step(p.t_start() - t, 0.0, q.dt)?;
        let fine = coarse.refined();
        self.check_budget(n, fine.intervals, q)?;
        let r = richardson::<_, C64>(self.eta_n_on_grid(p, t, n, &coarse), self.eta_n_on_grid(p, t, n, &fine), 2);
        // -beta * (-1/(i hbar))^{n-1} = -beta * (i/hbar)^{n-1}
        let prefactor = c64(0.0, 1.0 / self.hbar).powu(n as u32 - 1) * c64(-beta, 0.0);
        Ok(self.spectrum.from_eigenbasis(&(r * prefactor)).hermitian_part())
    }

    /// `eta_1(t) = -beta int e^{eps s} F(t + s) Adot(s) ds`.
    pub fn eta1(&self, p: &ForceProtocol, beta: f64, t: f64, q: &SeriesQuadrature) -> Result<Operator> {
        self.eta_n(p, beta, t, 1, q)
    }

    /// Second order in the explicit form
    /// `eta_2(t) = (beta/i hbar) int ds F(s) [C(s), Adot(s)]`,
    /// `C(s) = int_s^0 F(s') A(s') ds'` (force factors switched, times relative to `t`).
    pub fn eta2_explicit(&self, p: &ForceProtocol, beta: f64, t: f64, q: &SeriesQuadrature) -> Result<Operator> {
        let coarse = UniformGrid::with_max_step(p.t_start() - t, 0.0, q.dt)?;
        let fine = coarse.refined();
        self.check_budget(2, fine.intervals, q)?;
        let on_grid = |grid: &UniformGrid| -> DMatrix<C64> {
            let pts = grid.points();
            let h = grid.step();
            let d = self.dim();
            let force: Vec<f64> = pts.iter().map(|&s| p.switched(t + s, t)).collect();
            let fa: Vec<DMatrix<C64>> =
                pts.iter().zip(&force).map(|(&s, &f)| self.heisenberg(&self.a_eig, s) * c64(f, 0.0)).collect();
            let mut c = DMatrix::<C64>::zeros(d, d);
            let mut total = DMatrix::<C64>::zeros(d, d);
            for k in (0..pts.len()).rev() {
                if k + 1 < pts.len() {
                    c += (&fa[k] + &fa[k + 1]) * c64(0.5 * h, 0.0);
                }
                let adot = self.heisenberg(&self.adot_eig, pts[k]);
                let w = if k == 0 || k + 1 == pts.len() { 0.5 * h } else { h };
                total += (&c * &adot - &adot * &c) * c64(force[k] * w, 0.0);
            }
            total
        };
        let r = richardson::<_, C64>(on_grid(&coarse), on_grid(&fine), 2);
        let prefactor = c64(0.0, -beta / self.hbar);
        Ok(self.spectrum.from_eigenbasis(&(r * prefactor)).hermitian_part())
    }

    /// Closed form of `eta_1(t)` for the built-in waveforms: in the
    /// eigenbasis of `H`, `-beta Adot_mn int F(t+s) e^{eps s + i w_mn s} ds`
    /// with `w_mn = (E_m - E_n)/hbar`, integrated exactly from `t_start - t`.
    pub fn eta1_closed_form(&self, p: &ForceProtocol, beta: f64, t: f64) -> Operator {
        let e = self.spectrum.eigenvalues();
        let d = self.dim();
        let lower = p.t_start() - t;
        // int_{lower}^{0} e^{z s} ds = (1 - e^{z lower}) / z
        let prim = |z: C64| -> C64 {
            if z.norm() < 1e-300 {
                c64(-lower, 0.0)
            } else {
                (c64(1.0, 0.0) - (z * lower).exp()) / z
            }
        };
        let m = DMatrix::from_fn(d, d, |i, j| {
            let w = (e[i] - e[j]) / self.hbar;
            let z = c64(p.epsilon(), w);
            let integral = match p.waveform() {
                Waveform::Step => prim(z) * p.amplitude(),
                Waveform::Cosine { omega } => {
                    // cos(omega (t+s)) = (e^{i omega (t+s)} + e^{-i omega (t+s)})/2
                    let plus = C64::from_polar(1.0, omega * t) * prim(z + c64(0.0, omega));
                    let minus = C64::from_polar(1.0, -omega * t) * prim(z - c64(0.0, omega));
                    (plus + minus) * (0.5 * p.amplitude())
                }
            };
            self.adot_eig[(i, j)] * integral * (-beta)
        });
        self.spectrum.from_eigenbasis(&m).hermitian_part()
    }

    /// Non-perturbative `eta'(u)` on `grid` (which must start at `t_start`),
    /// from `d eta'/du = (1/i hbar)[H(u), eta'] - beta F(u) Adot`, with the
    /// force switched relative to the last grid time. Integrated with RK4 in
    /// the interaction picture of `H`.
    pub fn eta_prime_ode(
        &self,
        p: &ForceProtocol,
        beta: f64,
        grid: &TimeGrid,
        control: &StepControl,
    ) -> Result<Vec<(f64, Operator)>> {
        if (grid.start - p.t_start()).abs() > 1e-9 * p.t_start().abs().max(1.0) {
            return Err(QaError::InvalidArgument(format!(
                "trajectory must start at t_start = {}, got {}",
                p.t_start(),
                grid.start
            )));
        }
        let ug = grid.uniform()?;
        let points = ug.points();
        let t_ref = grid.end;
        let d = self.dim();
        let hbar = self.hbar;
        // dY/du = -(1/i hbar) F [A_I(u), Y] - beta F Adot_I(u), all in the eigenbasis
        let rhs = |u: f64, y: &Operator| -> Operator {
            let f = p.switched(u, t_ref);
            let ph = self.phases(u);
            let a = self.a_eig.component_mul(&ph);
            let adot = self.adot_eig.component_mul(&ph);
            let ym = y.matrix();
            let comm = &a * ym - ym * &a;
            Operator::from_square(comm * c64(0.0, f / hbar) - adot * c64(beta * f, 0.0))
        };
        let integrate = |substeps: usize| -> Result<Vec<Operator>> {
            let mut y = Operator::zeros(d);
            let mut out = Vec::with_capacity(points.len());
            out.push(y.clone());
            for w in points.windows(2) {
                let h = (w[1] - w[0]) / substeps as f64;
                for k in 0..substeps {
                    y = rk4_step(&rhs, w[0] + k as f64 * h, &y, h);
                }
                out.push(y.clone());
            }
            Ok(out)
        };
        let ys = with_step_halving(control, integrate, |ys, _| ys)?;
        Ok(points
            .iter()
            .zip(ys)
            .map(|(&u, y)| {
                // back from the interaction picture: e^{-iuH} Y e^{iuH}
                let m = self.heisenberg(y.matrix(), -u);
                (u, self.spectrum.from_eigenbasis(&m).hermitian_part())
            })
            .collect())
    }

    /// `eta_1 .. eta_N` at time `t`.
    pub fn entropy_expansion(
        &self,
        p: &ForceProtocol,
        beta: f64,
        t: f64,
        order: usize,
        q: &SeriesQuadrature,
    ) -> Result<EntropyExpansion> {
        let terms = (1..=order).map(|n| self.eta_n(p, beta, t, n, q)).collect::<Result<Vec<_>>>()?;
        EntropyExpansion::new(&self.hamiltonian, beta, terms)
    }
}

/// `eta(t) = Phi + beta H + sum_n eta_n(t)`.
#[derive(Debug, Clone)]
pub struct EntropyExpansion {
    /// `log Tr e^{-beta H}`.
    pub phi: f64,
    pub beta: f64,
    pub terms: Vec<Operator>,
}

impl EntropyExpansion {
    pub fn new(h: &Operator, beta: f64, terms: Vec<Operator>) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(QaError::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        for t in &terms {
            h.check_same_dim(t)?;
            t.check_hermitian(1e-9)?;
        }
        let s = Spectrum::decompose(h, HERMITIAN_RTOL)?;
        let shift = s.min_eigenvalue();
        let z: f64 = s.eigenvalues().iter().map(|e| (-beta * (e - shift)).exp()).sum();
        Ok(EntropyExpansion { phi: z.ln() - beta * shift, beta, terms })
    }
}

/// `exp(-beta H - sum eta_n)` normalized to unit trace.
pub fn zubarev_density(expansion: &EntropyExpansion, h: &Operator) -> Result<Operator> {
    let mut exponent = h.scale_real(expansion.beta);
    for t in &expansion.terms {
        h.check_same_dim(t)?;
        t.check_hermitian(1e-9)?;
        exponent += t;
    }
    let s = Spectrum::decompose(&exponent.hermitian_part(), HERMITIAN_RTOL)?;
    let shift = s.min_eigenvalue();
    let rho = s.map(|x| c64((-(x - shift)).exp(), 0.0));
    let tr = rho.trace().re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(QaError::DomainViolation("density matrix normalization failed".into()));
    }
    Ok(rho.scale_real(1.0 / tr))
}

/// Canonical state `e^{-beta H}/Z`.
pub fn thermal_state(h: &Operator, beta: f64) -> Result<Operator> {
    zubarev_density(&EntropyExpansion::new(h, beta, Vec::new())?, h)
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
    fn protocol_validation_and_json() {
        assert!(ForceProtocol::new(1.0, Waveform::Step, 0.05, -10.0).is_err());
        assert!(ForceProtocol::new(1.0, Waveform::Step, 0.0, -1e4).is_err());
        let p = ForceProtocol::with_default_start(0.1, Waveform::Cosine { omega: 1.0 }, 0.05).unwrap();
        assert!((p.epsilon() * p.t_start()).exp() <= SWITCH_TAIL);
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"waveform\":\"cos\""));
        let back: ForceProtocol = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"amplitude":1,"waveform":"cos","epsilon":0.1,"t_start":-400}"#;
        assert!(serde_json::from_str::<ForceProtocol>(bad).is_err());
    }

    #[test]
    fn stationary_state_stays_put() {
        let h = sigma(3);
        let rho0 = Operator::from_real_diagonal(&[0.7, 0.3]);
        let hc = h.clone();
        let grid = TimeGrid::new(0.0, 2.0, 0.1).unwrap();
        let evo = von_neumann_evolve(&move |_| hc.clone(), &rho0, &grid, 1.0, &StepControl::default()).unwrap();
        for s in &evo.states {
            assert!(operator_norm(&(s - &rho0)) < 1e-14);
        }
    }

    #[test]
    fn two_level_rotation() {
        // H = sigma_z, rho0 = (1 + sigma_x)/2: Bloch vector precesses at angular frequency 2
        let rho0 = (Operator::identity(2) + sigma(1)).scale_real(0.5);
        let grid = TimeGrid::new(0.0, 3.0, 0.05).unwrap();
        let h = sigma(3);
        let evo = von_neumann_evolve(&move |_| h.clone(), &rho0, &grid, 1.0, &StepControl::default()).unwrap();
        for (t, rho) in evo.grid.iter().zip(&evo.states) {
            let sx = (rho * sigma(1)).trace().re;
            let sy = (rho * sigma(2)).trace().re;
            assert!((sx - (2.0 * t).cos()).abs() < 1e-8);
            assert!((sy - (2.0 * t).sin()).abs() < 1e-8);
            assert!(((rho * rho).trace().re - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn eta1_matches_closed_form() {
        let h = Operator::from_real_rows(&[&[1.0, 0.3], &[0.3, -1.0]]).unwrap();
        let a = sigma(3);
        let sys = DrivenSystem::new(&h, &a, 1.0).unwrap();
        let p = ForceProtocol::with_default_start(0.3, Waveform::Cosine { omega: 1.3 }, 0.1).unwrap();
        let q = SeriesQuadrature { dt: 0.01, ..Default::default() };
        let num = sys.eta1(&p, 1.0, 0.7, &q).unwrap();
        let exact = sys.eta1_closed_form(&p, 1.0, 0.7);
        assert!(operator_norm(&(&num - &exact)) < 1e-9 * operator_norm(&exact), "{num:?} {exact:?}");
        assert!(num.is_hermitian());
    }

    #[test]
    fn commuting_coupling_gives_zero() {
        let h = sigma(3);
        let sys = DrivenSystem::new(&h, &sigma(3), 1.0).unwrap();
        let p = ForceProtocol::with_default_start(0.3, Waveform::Step, 0.2).unwrap();
        let q = SeriesQuadrature::default();
        for n in 1..=3 {
            assert!(operator_norm(&sys.eta_n(&p, 1.0, 0.0, n, &q).unwrap()) < 1e-15);
        }
    }

    #[test]
    fn explicit_second_order_matches_nested_form() {
        let h = Operator::from_real_rows(&[&[1.0, 0.3], &[0.3, -1.0]]).unwrap();
        let sys = DrivenSystem::new(&h, &sigma(3), 1.0).unwrap();
        let p = ForceProtocol::with_default_start(0.3, Waveform::Cosine { omega: 0.7 }, 0.2).unwrap();
        let q = SeriesQuadrature { dt: 0.02, ..Default::default() };
        let a = sys.eta_n(&p, 1.0, 0.4, 2, &q).unwrap();
        let b = sys.eta2_explicit(&p, 1.0, 0.4, &q).unwrap();
        assert!(operator_norm(&(&a - &b)) < 1e-9 * operator_norm(&a).max(1e-12));
    }

    #[test]
    fn budget_cap() {
        let sys = DrivenSystem::new(&sigma(3), &sigma(1), 1.0).unwrap();
        let p = ForceProtocol::with_default_start(0.3, Waveform::Step, 0.05).unwrap();
        let q = SeriesQuadrature { dt: 0.01, cost_cap: 1e3 };
        assert!(matches!(sys.eta_n(&p, 1.0, 0.0, 3, &q), Err(QaError::QuadratureBudgetExceeded { .. })));
    }

    #[test]
    fn zubarev_without_terms_is_canonical() {
        let h = Operator::from_real_diagonal(&[0.0, 1.0, 2.5]);
        let rho = thermal_state(&h, 0.8).unwrap();
        let z: f64 = [0.0f64, 1.0, 2.5].iter().map(|e| (-0.8 * e).exp()).sum();
        for (k, e) in [0.0f64, 1.0, 2.5].iter().enumerate() {
            assert!((rho.get(k, k).re - (-0.8 * e).exp() / z).abs() < 1e-15);
        }
        let exp = EntropyExpansion::new(&h, 0.8, vec![h.scale_real(0.3)]).unwrap();
        let shifted = zubarev_density(&exp, &h).unwrap();
        let expected = thermal_state(&h, 1.1).unwrap();
        assert!(operator_norm(&(shifted - expected)) < 1e-14);
    }
}
