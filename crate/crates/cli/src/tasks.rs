//! One function per subcommand, each turning a prepared config into a
//! [`TaskOutput`].

use hyperop_core::dissipative::{entropy_operator, expm, master_evolve};
use hyperop_core::hyperop::{alpha_estimate, alpha_verdict, quantum_derivative_apply, series_derivative_terms};
use hyperop_core::nonequilibrium::{zubarev_density, SeriesQuadrature};
use hyperop_core::response::{
    conductivity, conductivity_large_omega, conductivity_series, conductivity_time_integral, current_spread,
    ergodic_decomposition, sigma0_divergence_scan, TimeQuadrature,
};
use hyperop_core::taylor::taylor_terms;
use hyperop_core::{
    gateaux_fd, operator_norm, spectral_decompose, DissipativeModel, DrivenSystem, Model, Operator, ResponseSetup,
    StepControl, TimeGrid,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{
    DeriveConfig, DissipativeConfig, ResponseConfig, ScenarioConfig, SigmaMethod, TaylorConfig, ZubarevConfig,
};
use crate::error::{CliError, CliResult};
use crate::output::{Table, TaskOutput};

fn block<'a, T>(b: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    b.as_ref().ok_or_else(|| CliError::Config(format!("missing {name} block")))
}

pub fn derive(cfg: &ScenarioConfig, model: &Model) -> CliResult<TaskOutput> {
    let c: &DeriveConfig = block(&cfg.derive, "derive")?;
    let err = CliError::task("derive");
    let f = c.function.function();
    let a = c.a.resolve(model)?;
    let b = c.b.resolve(model)?;
    let kernel = quantum_derivative_apply(&f, &a, &b).map_err(err)?;
    let fd = gateaux_fd(&f, &a, &b, c.fd_step).map_err(CliError::task("derive"))?;
    let fd_error = operator_norm(&(&kernel - &fd));
    let terms = series_derivative_terms(&f, &a, &b, c.series_order).map_err(CliError::task("derive"))?;
    // the ratio test needs A > 0; report null otherwise
    let alpha = alpha_estimate(&a, &b, c.series_order.max(1)).ok();

    let mut table = Table::new(&["n", "term_norm", "partial_error", "alpha_n"]);
    let mut partial = Operator::zeros(a.dim());
    for (n, t) in terms.iter().enumerate() {
        partial += t;
        let alpha_n = match (&alpha, n) {
            (Some(al), n) if n >= 1 && n <= al.len() => al[n - 1],
            _ => f64::NAN,
        };
        table.push(vec![n.into(), operator_norm(t).into(), operator_norm(&(&partial - &kernel)).into(), alpha_n.into()]);
    }
    let summary = json!({
        "function": f.name(),
        "derivative": kernel,
        "derivative_norm": operator_norm(&kernel),
        "fd_step": c.fd_step,
        "fd_error": fd_error,
        "alpha_verdict": alpha.as_deref().map(alpha_verdict),
    });
    Ok(TaskOutput { summary, table })
}

pub fn taylor(cfg: &ScenarioConfig, model: &Model) -> CliResult<TaskOutput> {
    let c: &TaylorConfig = block(&cfg.taylor, "taylor")?;
    let f = c.function.function();
    let a = c.a.resolve(model)?;
    let b = c.b.resolve(model)?;
    let terms = taylor_terms(&f, &a, &b, c.x, c.order).map_err(CliError::task("taylor"))?;
    let shifted = (&a + b.scale_real(c.x)).hermitian_part();
    let exact = spectral_decompose(&shifted)
        .and_then(|s| s.apply(&f))
        .map_err(CliError::task("taylor"))?;
    let mut table = Table::new(&["order", "term_norm", "remainder"]);
    let mut partial = Operator::zeros(a.dim());
    for (n, t) in terms.iter().enumerate() {
        partial += t;
        table.push(vec![n.into(), operator_norm(t).into(), operator_norm(&(&partial - &exact)).into()]);
    }
    let summary = json!({
        "function": f.name(),
        "x": c.x,
        "order": c.order,
        "partial_sum": partial,
        "remainder": operator_norm(&(&partial - &exact)),
    });
    Ok(TaskOutput { summary, table })
}

pub fn response(cfg: &ScenarioConfig, model: &Model) -> CliResult<TaskOutput> {
    let c: &ResponseConfig = block(&cfg.response, "response")?;
    let err = CliError::task("response");
    let h = &model.hamiltonian;
    let setup = match (&c.current, &c.displacement) {
        (Some(j), None) => ResponseSetup::new(h, &j.resolve(model)?, c.beta, c.epsilon, cfg.hbar),
        (None, Some(a)) => ResponseSetup::from_displacement(h, &a.resolve(model)?, c.beta, c.epsilon, cfg.hbar),
        _ => return Err(CliError::Config("response needs exactly one of \"J\" and \"A\"".into())),
    }
    .map_err(err)?;
    let q = TimeQuadrature::default();
    let rows: Vec<_> = c
        .omega
        .values()
        .into_par_iter()
        .map(|omega| match c.method {
            SigmaMethod::Resolvent => Ok(conductivity(&setup, omega)),
            SigmaMethod::Series => conductivity_series(&setup, omega, c.series_order),
            SigmaMethod::TimeIntegral => conductivity_time_integral(&setup, omega, &q),
            SigmaMethod::LargeOmega => Ok(conductivity_large_omega(&setup, omega)),
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::task("response"))?;
    let mut table = Table::new(&["omega", "re_sigma", "im_sigma", "method", "epsilon"]);
    for r in &rows {
        table.push(vec![r.omega.into(), r.sigma.re.into(), r.sigma.im.into(), r.method.label().into(), c.epsilon.into()]);
    }
    let mut summary = json!({
        "beta": c.beta,
        "epsilon": c.epsilon,
        "current_spread": current_spread(&setup),
    });
    if !c.constants.is_empty() {
        let constants = c.constants.iter().map(|k| k.resolve(model)).collect::<CliResult<Vec<_>>>()?;
        let dec = ergodic_decomposition(&setup, &constants).map_err(CliError::task("response"))?;
        let eps: Vec<f64> = [1.0, 0.1, 0.01].iter().map(|s| s * c.epsilon).collect();
        let scan = sigma0_divergence_scan(&setup, &eps).map_err(CliError::task("response"))?;
        summary["ergodic"] = json!({
            "coefficients": dec.coefficients,
            "norms": dec.norms,
            "drude_weight": dec.drude_weight(c.beta),
            "sigma0_scan": scan,
        });
    }
    Ok(TaskOutput { summary, table })
}

pub fn zubarev(cfg: &ScenarioConfig, model: &Model) -> CliResult<TaskOutput> {
    let c: &ZubarevConfig = block(&cfg.zubarev, "zubarev")?;
    let a = c.a_op.resolve(model)?;
    let h = &model.hamiltonian;
    let sys = DrivenSystem::new(h, &a, cfg.hbar).map_err(CliError::task("zubarev"))?;
    let q = SeriesQuadrature { dt: c.quadrature_dt, ..SeriesQuadrature::default() };
    let times = TimeGrid::new(c.grid.t_begin, c.grid.t_end, c.grid.dt)
        .and_then(|g| g.points())
        .map_err(CliError::task("zubarev"))?;
    let rows: Vec<(f64, Vec<f64>, f64)> = times
        .into_par_iter()
        .map(|t| {
            let expansion = sys.entropy_expansion(&c.force, c.beta, t, c.order, &q)?;
            let norms = expansion.terms.iter().map(operator_norm).collect();
            let rho = zubarev_density(&expansion, h)?;
            Ok((t, norms, (&rho * &a).trace().re))
        })
        .collect::<hyperop_core::Result<_>>()
        .map_err(CliError::task("zubarev"))?;
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=c.order).map(|n| format!("eta_{n}_norm")));
    columns.push("avg_A".to_string());
    let mut table = Table { columns, rows: Vec::new() };
    for (t, norms, avg) in rows {
        let mut row = vec![t.into()];
        row.extend(norms.into_iter().map(Into::into));
        row.push(avg.into());
        table.push(row);
    }
    let equilibrium = zubarev_density(
        &hyperop_core::EntropyExpansion::new(h, c.beta, Vec::new()).map_err(CliError::task("zubarev"))?,
        h,
    )
    .map_err(CliError::task("zubarev"))?;
    let summary = json!({
        "order": c.order,
        "equilibrium_avg_A": (&equilibrium * &a).trace().re,
    });
    Ok(TaskOutput { summary, table })
}

pub fn dissipative(cfg: &ScenarioConfig, model: &Model) -> CliResult<TaskOutput> {
    let c: &DissipativeConfig = block(&cfg.dissipative, "dissipative")?;
    let lambda = block(&c.lambda, "Lambda")?.resolve(model)?;
    let h = &model.hamiltonian;
    let d = h.dim();
    let rho0 = match &c.rho0 {
        Some(r) => r.resolve(model)?,
        None => Operator::identity(d).scale_real(1.0 / d as f64),
    };
    let dm = DissipativeModel::new(h, &lambda, cfg.hbar).map_err(CliError::task("dissipative"))?;
    let control = StepControl { rtol: c.rtol, ..StepControl::default() };
    let grid = TimeGrid::new(0.0, c.t_end, c.dt).map_err(CliError::task("dissipative"))?;
    let master = master_evolve(&dm, &rho0, &grid, &control).map_err(CliError::task("dissipative"))?;
    let residuals: Vec<f64> = master
        .grid
        .par_iter()
        .zip(master.states.par_iter())
        .map(|(&t, rho)| {
            let steps = ((c.path_steps as f64 * t).ceil() as usize).max(1);
            let res = entropy_operator(&dm, &rho0, t, steps, &control)?;
            Ok(operator_norm(&(expm(&res.phi)? - rho)))
        })
        .collect::<hyperop_core::Result<_>>()
        .map_err(CliError::task("dissipative"))?;
    let mut table = Table::new(&["t", "trace", "norm", "entropy_residual"]);
    for ((t, rho), r) in master.grid.iter().zip(&master.states).zip(&residuals) {
        table.push(vec![(*t).into(), rho.trace().re.into(), operator_norm(rho).into(), (*r).into()]);
    }
    let summary = json!({
        "integrator": master.method,
        "max_entropy_residual": residuals.iter().cloned().fold(0.0, f64::max),
    });
    Ok(TaskOutput { summary, table })
}
