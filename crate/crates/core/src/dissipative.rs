//! Dissipative density operators: ordered exponentials, the master equation
//! `d rho/dt = (1/i hbar)[H, rho] + Lambda rho + rho Lambda^dagger`, its
//! factorized solution, and the entropy operator obtained from the
//! logarithm ODE `dPhi/dx = (delta_Phi / (e^{delta_Phi} - 1)) L(x, t)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QaError, Result};
use crate::hyperop::{vectorize, unvectorize, MAX_MATERIALIZED_DIM};
use crate::nonequilibrium::{EvolutionResult, MethodMeta, TimeGrid};
use crate::operator::{c64, Operator, C64, HERMITIAN_RTOL};
use crate::propagator::{rk4_step, with_step_halving, StepControl};
use crate::spectrum::Spectrum;

const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const SQRT3_12: f64 = 0.144_337_567_297_406_4;

/// Distance from a nonzero multiple of `2 pi i` below which the kernel
/// `lambda / (e^lambda - 1)` is treated as singular.
pub const KERNEL_SINGULARITY_TOL: f64 = 1e-12;

/// Ordering of a product integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    /// Latest time leftmost: `dU/dt = A(t) U`.
    Plus,
    /// Latest time rightmost: `dU/dt = U A(t)`.
    Minus,
}

/// Ordered exponential of `a(s)` over `[t0, t1]` as a product of `steps`
/// fourth-order Magnus factors (two Gauss points per step).
pub fn ordered_exp(a: &dyn Fn(f64) -> Operator, t0: f64, t1: f64, ordering: Ordering, steps: usize) -> Result<Operator> {
    if steps == 0 {
        return Err(QaError::InvalidArgument("ordered exponential needs at least one step".into()));
    }
    let h = (t1 - t0) / steps as f64;
    let mut u: Option<Operator> = None;
    for k in 0..steps {
        let f = magnus_factor(a, t0 + k as f64 * h, h, ordering)?;
        u = Some(match (u, ordering) {
            (None, _) => f,
            (Some(u), Ordering::Plus) => f * u,
            (Some(u), Ordering::Minus) => u * f,
        });
    }
    let u = u.expect("at least one step");
    if !u.is_finite() {
        return Err(QaError::StepFailure("ordered exponential overflowed".into()));
    }
    Ok(u)
}

fn magnus_factor(a: &dyn Fn(f64) -> Operator, t: f64, h: f64, ordering: Ordering) -> Result<Operator> {
    let a1 = a(t + (0.5 - SQRT3_6) * h);
    let a2 = a(t + (0.5 + SQRT3_6) * h);
    let sign = match ordering {
        Ordering::Plus => 1.0,
        Ordering::Minus => -1.0,
    };
    let omega = (&a1 + &a2).scale_real(0.5 * h) + a2.commutator(&a1).scale_real(sign * SQRT3_12 * h * h);
    expm(&omega)
}

/// General (non-normal) matrix exponential.
pub fn expm(x: &Operator) -> Result<Operator> {
    let e = x.matrix().clone().exp();
    Operator::new(e)
}

/// Hamiltonian, dissipator and `hbar` of the master equation.
#[derive(Debug, Clone)]
pub struct DissipativeModel {
    h: Operator,
    lambda: Operator,
    hbar: f64,
    spectrum: Spectrum,
}

impl DissipativeModel {
    pub fn new(h: &Operator, lambda: &Operator, hbar: f64) -> Result<Self> {
        h.check_same_dim(lambda)?;
        if !(hbar > 0.0) {
            return Err(QaError::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        let spectrum = Spectrum::decompose(h, HERMITIAN_RTOL)?;
        if !lambda.is_finite() {
            return Err(QaError::InvalidArgument("dissipator has non-finite entries".into()));
        }
        Ok(DissipativeModel { h: h.hermitian_part(), lambda: lambda.clone(), hbar, spectrum })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn dissipator(&self) -> &Operator {
        &self.lambda
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `e^{tH/i hbar}`.
    pub fn unitary(&self, t: f64) -> Operator {
        self.spectrum.exp(c64(0.0, -t / self.hbar))
    }

    /// `Lambda_s = e^{-sH/i hbar} Lambda e^{sH/i hbar}`.
    pub fn lambda_at(&self, s: f64) -> Operator {
        let u = self.unitary(s);
        u.adjoint() * &self.lambda * u
    }

    /// Right-hand side of the master equation.
    pub fn generator(&self, rho: &Operator) -> Operator {
        let coherent = self.h.commutator(rho).scale(c64(0.0, -1.0 / self.hbar));
        coherent + &self.lambda * rho + rho * self.lambda.adjoint()
    }

    /// `e^{K t} rho0 e^{K^dagger t}` with `K = Lambda - iH/hbar`.
    pub fn closed_form(&self, rho0: &Operator, t: f64) -> Result<Operator> {
        let k = &self.lambda + self.h.scale(c64(0.0, -1.0 / self.hbar));
        let m = expm(&k.scale_real(t))?;
        Ok(&m * rho0 * m.adjoint())
    }
}

/// Integrates the master equation with RK4 on `grid`, halving the substep
/// until converged.
pub fn master_evolve(model: &DissipativeModel, rho0: &Operator, grid: &TimeGrid, control: &StepControl) -> Result<EvolutionResult> {
    model.h.check_same_dim(rho0)?;
    let ug = grid.uniform()?;
    let points = ug.points();
    let rhs = |_t: f64, y: &Operator| model.generator(y);
    let integrate = |substeps: usize| -> Result<Vec<Operator>> {
        let mut states = Vec::with_capacity(points.len());
        let mut rho = rho0.clone();
        states.push(rho.clone());
        for w in points.windows(2) {
            let h = (w[1] - w[0]) / substeps as f64;
            for k in 0..substeps {
                rho = rk4_step(&rhs, w[0] + k as f64 * h, &rho, h);
            }
            if !rho.is_finite() {
                return Err(QaError::StepFailure("master equation diverged".into()));
            }
            states.push(rho.clone());
        }
        Ok(states)
    };
    let step = ug.step();
    with_step_halving(control, integrate, |states, substeps| EvolutionResult {
        grid: points.clone(),
        states,
        method: MethodMeta { step: step / substeps as f64, substeps, order: 4, integrator: "rk4" },
    })
}

/// `V(s) = exp_+(-int_0^s Lambda_u^dagger du)` and its inverse
/// `W(s) = exp_-(int_0^s Lambda_u^dagger du)` tabulated on a uniform grid,
/// with one extra Magnus step to reach off-grid times.
struct DampingPath<'a> {
    model: &'a DissipativeModel,
    h: f64,
    v: Vec<Operator>,
    w: Vec<Operator>,
}

impl<'a> DampingPath<'a> {
    fn new(model: &'a DissipativeModel, t: f64, steps: usize) -> Result<Self> {
        let steps = steps.max(1);
        let h = t / steps as f64;
        let mut v = vec![Operator::identity(model.dim())];
        let mut w = v.clone();
        for k in 0..steps {
            let (fv, fw) = Self::segment(model, k as f64 * h, h)?;
            v.push(fv * &v[k]);
            w.push(&w[k] * fw);
        }
        Ok(DampingPath { model, h, v, w })
    }

    fn segment(model: &DissipativeModel, s: f64, h: f64) -> Result<(Operator, Operator)> {
        let minus = |u: f64| -model.lambda_at(u).adjoint();
        let plus = |u: f64| model.lambda_at(u).adjoint();
        Ok((magnus_factor(&minus, s, h, Ordering::Plus)?, magnus_factor(&plus, s, h, Ordering::Minus)?))
    }

    fn at(&self, s: f64) -> Result<(Operator, Operator)> {
        if self.h == 0.0 {
            return Ok((self.v[0].clone(), self.w[0].clone()));
        }
        let k = ((s / self.h).floor().max(0.0) as usize).min(self.v.len() - 1);
        let rest = s - k as f64 * self.h;
        if rest.abs() <= 1e-14 * self.h {
            return Ok((self.v[k].clone(), self.w[k].clone()));
        }
        let (fv, fw) = Self::segment(self.model, k as f64 * self.h, rest)?;
        Ok((fv * &self.v[k], &self.w[k] * fw))
    }

    /// `L(s) = W(s)(Lambda_s + Lambda_s^dagger)V(s)`.
    fn l_at(&self, s: f64) -> Result<Operator> {
        let (v, w) = self.at(s)?;
        let lam = self.model.lambda_at(s);
        let sym = &lam + lam.adjoint();
        Ok(w * sym * v)
    }
}

/// The objects of the factorized solution at a fixed time `t`.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub t: f64,
    /// Interaction-picture density `f(t) = V(t) g(t) V(t)^{-1}`.
    pub f_t: Operator,
    /// `g(t) = exp_+(int_0^t L(s) ds) rho(0)`.
    pub g_t: Operator,
    pub lambda_t: Operator,
    /// `L(t)`.
    pub l_t: Operator,
    /// `T = e^{tH/i hbar} V(t)`, so that `L(s, t) = T L(s) T^{-1}`.
    pub transfer: Operator,
    pub transfer_inv: Operator,
    /// `rho(t, 0) = T rho(0) T^{-1}`.
    pub rho_t0: Operator,
    /// `eta(t, 0) = -log rho(t, 0)`, when `rho(0)` is positive definite.
    pub eta_t0: Option<Operator>,
}

impl Factorization {
    /// `L(s, t)` from `L(s)`.
    pub fn conjugate(&self, l_s: &Operator) -> Operator {
        &self.transfer * l_s * &self.transfer_inv
    }
}

/// Assembles `rho(t) = exp_+(int_0^t L(s, t) ds) rho(t, 0)` from ordered
/// exponentials on a grid of `steps` intervals.
pub fn structured_solution(model: &DissipativeModel, rho0: &Operator, t: f64, steps: usize) -> Result<(Operator, Factorization)> {
    model.h.check_same_dim(rho0)?;
    if !(t >= 0.0) {
        return Err(QaError::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    let steps = steps.max(1);
    let path = DampingPath::new(model, t, steps)?;
    let (v_t, w_t) = path.at(t)?;
    let l_of_s = |s: f64| path.l_at(s).expect("damping path evaluation");
    let g_prop = ordered_exp(&l_of_s, 0.0, t, Ordering::Plus, steps)?;
    let u = model.unitary(t);
    let transfer = &u * &v_t;
    let transfer_inv = &w_t * u.adjoint();
    let rho_t0 = &transfer * rho0 * &transfer_inv;
    let g_t = &g_prop * rho0;
    let f_t = &v_t * &g_t * &w_t;
    let eta_t0 = log_similar(rho0, &transfer, &transfer_inv).ok().map(|x| -x);
    let rho = (&transfer * &g_prop * &transfer_inv) * &rho_t0;
    let fact = Factorization {
        t,
        f_t,
        g_t,
        lambda_t: model.lambda_at(t),
        l_t: path.l_at(t)?,
        transfer,
        transfer_inv,
        rho_t0,
        eta_t0,
    };
    Ok((rho, fact))
}

/// `T log(rho0) T^{-1}` for positive definite Hermitian `rho0`.
fn log_similar(rho0: &Operator, t: &Operator, t_inv: &Operator) -> Result<Operator> {
    let s = Spectrum::decompose(rho0, HERMITIAN_RTOL).map_err(|e| QaError::LogFailure(e.to_string()))?;
    if s.min_eigenvalue() <= 0.0 {
        return Err(QaError::LogFailure(format!("initial density has eigenvalue {:.3e}", s.min_eigenvalue())));
    }
    let log = s.map(|x| c64(x.ln(), 0.0));
    Ok(t * log * t_inv)
}

/// Trajectory of the logarithm ODE.
#[derive(Debug, Clone)]
pub struct EntropyOperatorResult {
    /// `Phi(t) = -eta_hat(t)`.
    pub phi: Operator,
    pub phi0: Operator,
    pub method: MethodMeta,
}

impl EntropyOperatorResult {
    pub fn entropy_operator(&self) -> Operator {
        -self.phi.clone()
    }
}

/// `delta_Phi` as a `d^2 x d^2` matrix in column-stacking order.
fn inner_derivation_matrix(phi: &DMatrix<C64>) -> DMatrix<C64> {
    let d = phi.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    id.kronecker(phi) - phi.transpose().kronecker(&id)
}

fn check_kernel(phi: &DMatrix<C64>) -> Result<()> {
    // only eigenvalue differences matter, and they are bounded by twice the
    // norm of the traceless part, so below norm 1 none can reach 2 pi
    let d = phi.nrows();
    let mean = phi.trace() / c64(d as f64, 0.0);
    let centered = phi - DMatrix::<C64>::identity(d, d) * mean;
    if centered.norm() < 1.0 {
        return Ok(());
    }
    // the unshifted QR iteration can stall on clustered spectra; without
    // eigenvalues the LU solve of Delta(Phi) still guards singularity
    let Some(schur) = centered.try_schur(f64::EPSILON, 1000 * d) else {
        return Ok(());
    };
    let eig = schur.unpack().1;
    let mu: Vec<C64> = (0..eig.nrows()).map(|i| eig[(i, i)]).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    for a in &mu {
        for b in &mu {
            let diff = a - b;
            let k = (diff.im / two_pi).round();
            if k != 0.0 && (diff - c64(0.0, k * two_pi)).norm() < KERNEL_SINGULARITY_TOL {
                return Err(QaError::KernelSingularity(format!(
                    "inner derivation eigenvalue {diff} sits on 2 pi i x {k}"
                )));
            }
        }
    }
    Ok(())
}

/// `(delta_Phi / (e^{delta_Phi} - 1)) L`, computed by solving
/// `Delta(Phi) X = L` with `Delta(Phi) = (e^{delta_Phi} - 1)/delta_Phi`
/// read off the exponential of the block matrix `[[delta_Phi, 1], [0, 0]]`.
pub fn inverse_delta_apply(phi: &Operator, l: &Operator) -> Result<Operator> {
    let d = phi.dim();
    if d > MAX_MATERIALIZED_DIM {
        return Err(QaError::DimensionCap { dim: d, cap: MAX_MATERIALIZED_DIM });
    }
    check_kernel(phi.matrix())?;
    let n = d * d;
    let delta = inner_derivation_matrix(phi.matrix());
    let mut block = DMatrix::<C64>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&delta);
    for i in 0..n {
        block[(i, n + i)] = c64(1.0, 0.0);
    }
    let e = block.exp();
    let kernel = e.view((0, n), (n, n)).into_owned();
    let rhs = vectorize(l);
    let x = kernel
        .lu()
        .solve(&rhs)
        .ok_or_else(|| QaError::KernelSingularity("Delta(Phi) is singular".into()))?;
    if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(QaError::KernelSingularity("non-finite kernel solve".into()));
    }
    Ok(unvectorize(&x, d))
}

/// Integrates `dPhi/dx = Delta(Phi)^{-1} L(x, t)` from `Phi(0) = -eta(t, 0)`
/// to `x = t`. `steps` is the starting resolution shared by the RK4 grid and
/// the ordered exponentials behind `L(x, t)` and `eta(t, 0)`; both are refined
/// together until the result is converged.
pub fn entropy_operator(
    model: &DissipativeModel,
    rho0: &Operator,
    t: f64,
    steps: usize,
    control: &StepControl,
) -> Result<EntropyOperatorResult> {
    model.h.check_same_dim(rho0)?;
    if !(t >= 0.0) {
        return Err(QaError::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    let u = model.unitary(t);
    let integrate = |substeps: usize| -> Result<Vec<Operator>> {
        let n = steps.max(1) * substeps;
        let h = t / n as f64;
        let path = DampingPath::new(model, t, n)?;
        let (v_t, w_t) = path.at(t)?;
        let transfer = &u * &v_t;
        let transfer_inv = &w_t * u.adjoint();
        let phi0 = log_similar(rho0, &transfer, &transfer_inv)?;
        let rhs = |x: f64, p: &Operator| -> Result<Operator> {
            inverse_delta_apply(p, &(&transfer * path.l_at(x)? * &transfer_inv))
        };
        let mut phi = phi0.clone();
        for k in 0..n {
            let x = k as f64 * h;
            let k1 = rhs(x, &phi)?;
            let k2 = rhs(x + 0.5 * h, &(&phi + k1.scale_real(0.5 * h)))?;
            let k3 = rhs(x + 0.5 * h, &(&phi + k2.scale_real(0.5 * h)))?;
            let k4 = rhs(x + h, &(&phi + k3.scale_real(h)))?;
            phi += &(k1 + k2.scale_real(2.0) + k3.scale_real(2.0) + k4).scale_real(h / 6.0);
            if !phi.is_finite() {
                return Err(QaError::StepFailure(format!("logarithm ODE diverged at x = {x:.4}")));
            }
        }
        Ok(vec![phi, phi0])
    };
    let base = t / steps.max(1) as f64;
    with_step_halving(control, integrate, |mut states, substeps| {
        let phi0 = states.pop().expect("two states");
        EntropyOperatorResult {
            phi: states.pop().expect("two states"),
            phi0,
            method: MethodMeta { step: base / substeps as f64, substeps, order: 4, integrator: "rk4" },
        }
    })
}

/// Compares the closed-form variation
/// `(1/i hbar) exp_+(int_{t1}^t) dH exp_+(int_0^{t1})` of
/// `exp_+((1/i hbar) int_0^t H(s) ds)` with a central difference under a
/// box bump of width `width` and unit area at `t1`.
pub fn functional_derivative_check(
    h_of_t: &dyn Fn(f64) -> Operator,
    dh: &Operator,
    t: f64,
    t1: f64,
    width: f64,
    steps: usize,
    hbar: f64,
) -> Result<f64> {
    if !(0.0 <= t1 && t1 <= t) || !(width > 0.0) {
        return Err(QaError::InvalidArgument(format!("need 0 <= t1 <= t and width > 0, got t1 = {t1}, t = {t}")));
    }
    let lo = (t1 - 0.5 * width).max(0.0);
    let hi = (t1 + 0.5 * width).min(t);
    let gen = |s: f64| h_of_t(s).scale(c64(0.0, -1.0 / hbar));
    let n_for = |a: f64, b: f64| (((b - a) / t.max(1e-300)) * steps as f64).ceil().max(1.0) as usize;
    let before = ordered_exp(&gen, 0.0, lo, Ordering::Plus, n_for(0.0, lo))?;
    let after = ordered_exp(&gen, hi, t, Ordering::Plus, n_for(hi, t))?;
    let kappa = 1e-5;
    let window = |sign: f64| -> Result<Operator> {
        let bumped = |s: f64| (h_of_t(s) + dh.scale_real(sign * kappa / width)).scale(c64(0.0, -1.0 / hbar));
        ordered_exp(&bumped, lo, hi, Ordering::Plus, 8)
    };
    let fd = (&after * (window(1.0)? - window(-1.0)?) * &before).scale_real(0.5 / kappa);
    let to_t1 = ordered_exp(&gen, 0.0, t1, Ordering::Plus, n_for(0.0, t1))?;
    let from_t1 = ordered_exp(&gen, t1, t, Ordering::Plus, n_for(t1, t))?;
    let closed = (from_t1 * dh * to_t1).scale(c64(0.0, -1.0 / hbar));
    Ok((fd - closed).frobenius_norm())
}
