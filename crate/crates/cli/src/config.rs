//! Scenario files: one model, one task and its parameter block.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use hyperop_core::nonequilibrium::SWITCH_TAIL;
use hyperop_core::{build_model, ForceProtocol, Model, ModelSpec, Operator, ScalarFunction, Waveform};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Derive,
    Taylor,
    Response,
    Zubarev,
    Dissipative,
    VerifyAll,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Derive => "derive",
            TaskKind::Taylor => "taylor",
            TaskKind::Response => "response",
            TaskKind::Zubarev => "zubarev",
            TaskKind::Dissipative => "dissipative",
            TaskKind::VerifyAll => "verify-all",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for artifacts; standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// A named observable of the model (`"H"`, `"sz_0"`, `"current_0"`, ...) or an inline operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum OperatorRef {
    Named(String),
    Inline(Operator),
}

impl OperatorRef {
    pub fn named(name: &str) -> Self {
        OperatorRef::Named(name.to_string())
    }

    pub fn resolve(&self, model: &Model) -> CliResult<Operator> {
        let op = match self {
            OperatorRef::Named(name) => model.observable(name).map_err(|e| CliError::Config(e.to_string()))?.clone(),
            OperatorRef::Inline(op) => op.clone(),
        };
        if op.dim() != model.hamiltonian.dim() {
            return Err(CliError::Config(format!(
                "operator has dimension {}, the model has {}",
                op.dim(),
                model.hamiltonian.dim()
            )));
        }
        Ok(op)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FunctionName {
    ExpNeg,
    Inverse,
    Log,
}

impl FunctionName {
    pub fn function(self) -> ScalarFunction {
        match self {
            FunctionName::ExpNeg => ScalarFunction::exp_neg(),
            FunctionName::Inverse => ScalarFunction::inverse(),
            FunctionName::Log => ScalarFunction::log(),
        }
    }
}

/// Quantum derivative `(df/dA) B` with its finite-difference check and the
/// commutator series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DeriveConfig {
    pub function: FunctionName,
    #[serde(rename = "A")]
    pub a: OperatorRef,
    #[serde(rename = "B")]
    pub b: OperatorRef,
    pub fd_step: f64,
    pub series_order: usize,
}

impl Default for DeriveConfig {
    fn default() -> Self {
        DeriveConfig {
            function: FunctionName::ExpNeg,
            a: OperatorRef::named("H"),
            b: OperatorRef::named("sx_0"),
            fd_step: 1e-6,
            series_order: 30,
        }
    }
}

/// Partial sums of `f(A + xB)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TaylorConfig {
    pub function: FunctionName,
    #[serde(rename = "A")]
    pub a: OperatorRef,
    #[serde(rename = "B")]
    pub b: OperatorRef,
    pub x: f64,
    pub order: usize,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        TaylorConfig {
            function: FunctionName::ExpNeg,
            a: OperatorRef::named("H"),
            b: OperatorRef::named("sx_0"),
            x: 0.2,
            order: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMethod {
    Resolvent,
    Series,
    TimeIntegral,
    LargeOmega,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|k| self.start + (self.end - self.start) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// Conductivity `sigma(omega)` of a current, given directly or as the time
/// derivative of a displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseConfig {
    /// Defaults to `"current_0"` when neither `J` nor `A` is given.
    #[serde(rename = "J", skip_serializing_if = "Option::is_none")]
    pub current: Option<OperatorRef>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub displacement: Option<OperatorRef>,
    pub beta: f64,
    pub epsilon: f64,
    pub omega: FrequencyGrid,
    pub method: SigmaMethod,
    pub series_order: usize,
    /// Conserved quantities for the ergodic decomposition.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub constants: Vec<OperatorRef>,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        ResponseConfig {
            current: None,
            displacement: None,
            beta: 1.0,
            epsilon: 0.1,
            omega: FrequencyGrid { start: -5.0, end: 5.0, points: 50 },
            method: SigmaMethod::Resolvent,
            series_order: 30,
            constants: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ObservationGrid {
    #[serde(default)]
    pub t_begin: f64,
    pub t_end: f64,
    pub dt: f64,
}

/// Entropy-operator expansion under an adiabatically switched force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ZubarevConfig {
    #[serde(rename = "A_op")]
    pub a_op: OperatorRef,
    pub beta: f64,
    pub force: ForceProtocol,
    pub grid: ObservationGrid,
    pub order: usize,
    /// Trapezoid step of the time-ordered integrals.
    pub quadrature_dt: f64,
}

impl Default for ZubarevConfig {
    fn default() -> Self {
        let epsilon = 0.05;
        let force = ForceProtocol::new(1e-2, Waveform::Cosine { omega: 1.0 }, epsilon, default_start(epsilon))
            .expect("default force is valid");
        ZubarevConfig {
            a_op: OperatorRef::named("sz_0"),
            beta: 1.0,
            force,
            grid: ObservationGrid { t_begin: 0.0, t_end: 2.0, dt: 0.5 },
            order: 2,
            quadrature_dt: 0.01,
        }
    }
}

/// A round `t_start` with `e^{eps t_start}` below the admissible tail.
fn default_start(epsilon: f64) -> f64 {
    (SWITCH_TAIL.ln() / epsilon).floor()
}

/// Damped evolution `d rho/dt = (1/i hbar)[H, rho] + Lambda rho + rho Lambda^dagger`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DissipativeConfig {
    /// Defaults to `-0.1 sx_0` on spin chains.
    #[serde(rename = "Lambda", default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<OperatorRef>,
    /// Initial state; the normalized identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<OperatorRef>,
    pub t_end: f64,
    pub dt: f64,
    /// Ordered-exponential steps per unit of the integration interval.
    pub path_steps: usize,
    pub rtol: f64,
}

impl Default for DissipativeConfig {
    fn default() -> Self {
        DissipativeConfig { lambda: None, rho0: None, t_end: 1.0, dt: 0.25, path_steps: 20, rtol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive: Option<DeriveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taylor: Option<TaylorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ResponseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zubarev: Option<ZubarevConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipative: Option<DissipativeConfig>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_hbar() -> f64 {
    1.0
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            model: ModelSpec::default(),
            task: None,
            seed: DEFAULT_SEED,
            hbar: 1.0,
            output: OutputConfig::default(),
            derive: None,
            taylor: None,
            response: None,
            zubarev: None,
            dissipative: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks the config against the subcommand, fills the task's block with
    /// defaults and builds the model.
    pub fn prepare(&mut self, task: TaskKind) -> CliResult<Model> {
        if let Some(declared) = self.task {
            if declared != task {
                return Err(CliError::Config(format!(
                    "config declares task {:?} but the subcommand is {:?}",
                    declared.name(),
                    task.name()
                )));
            }
        }
        self.task = Some(task);
        if !(self.hbar > 0.0) {
            return Err(CliError::Config(format!("hbar must be positive, got {}", self.hbar)));
        }
        let model = build_model(&self.model).map_err(|e| CliError::Config(format!("model: {e}")))?;
        match task {
            TaskKind::Derive => {
                let block = self.derive.get_or_insert_with(Default::default);
                positive("fd_step", block.fd_step)?;
                block.a.resolve(&model)?;
                block.b.resolve(&model)?;
            }
            TaskKind::Taylor => {
                let block = self.taylor.get_or_insert_with(Default::default);
                finite("x", block.x)?;
                block.a.resolve(&model)?;
                block.b.resolve(&model)?;
            }
            TaskKind::Response => {
                let block = self.response.get_or_insert_with(Default::default);
                if block.current.is_none() && block.displacement.is_none() {
                    block.current = Some(OperatorRef::named("current_0"));
                }
                match (&block.current, &block.displacement) {
                    (Some(j), None) => {
                        j.resolve(&model)?;
                    }
                    (None, Some(a)) => {
                        a.resolve(&model)?;
                    }
                    _ => return Err(CliError::Config("response needs exactly one of \"J\" and \"A\"".into())),
                }
                positive("beta", block.beta)?;
                positive("epsilon", block.epsilon)?;
                if block.omega.points == 0 {
                    return Err(CliError::Config("the frequency grid is empty".into()));
                }
                for c in &block.constants {
                    c.resolve(&model)?;
                }
            }
            TaskKind::Zubarev => {
                let block = self.zubarev.get_or_insert_with(Default::default);
                block.a_op.resolve(&model)?;
                positive("beta", block.beta)?;
                positive("grid.dt", block.grid.dt)?;
                positive("quadrature_dt", block.quadrature_dt)?;
                if block.grid.t_end < block.grid.t_begin {
                    return Err(CliError::Config("grid.t_end precedes grid.t_begin".into()));
                }
                if block.order == 0 {
                    return Err(CliError::Config("order must be at least 1".into()));
                }
            }
            TaskKind::Dissipative => {
                let block = self.dissipative.get_or_insert_with(Default::default);
                if block.lambda.is_none() {
                    let sx = model
                        .observable("sx_0")
                        .map_err(|_| CliError::Config("custom models need an explicit \"Lambda\"".into()))?;
                    block.lambda = Some(OperatorRef::Inline(sx.scale_real(-0.1)));
                }
                if let Some(l) = &block.lambda {
                    l.resolve(&model)?;
                }
                if let Some(r) = &block.rho0 {
                    r.resolve(&model)?;
                }
                positive("dt", block.dt)?;
                positive("rtol", block.rtol)?;
                if !(block.t_end >= 0.0) {
                    return Err(CliError::Config(format!("t_end must be non-negative, got {}", block.t_end)));
                }
            }
            TaskKind::VerifyAll => {}
        }
        Ok(model)
    }

    /// The config as echoed into artifacts; the output location is left out
    /// so that reruns into different directories produce identical files.
    pub fn echo(&self) -> ScenarioConfig {
        let mut echo = self.clone();
        echo.output.path = None;
        echo
    }
}

fn positive(name: &str, value: f64) -> CliResult<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {value}")))
    }
}

fn finite(name: &str, value: f64) -> CliResult<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be finite, got {value}")))
    }
}

/// JSON schema of scenario files.
pub fn schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schema serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_json(r#"{"model": {"kind": "xx_chain"}, "bogus": 1}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"response": {"betta": 1}}"#).is_err());
    }

    #[test]
    fn task_mismatch_is_a_config_error() {
        let mut cfg = ScenarioConfig::from_json(r#"{"task": "taylor"}"#).unwrap();
        let err = cfg.prepare(TaskKind::Response).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn operator_refs_accept_names_and_matrices() {
        let named: OperatorRef = serde_json::from_str(r#""sz_0""#).unwrap();
        assert_eq!(named, OperatorRef::named("sz_0"));
        let inline: OperatorRef =
            serde_json::from_str(r#"{"dim": 2, "re": [[1, 0], [0, -1]], "im": [[0, 0], [0, 0]]}"#).unwrap();
        assert!(matches!(inline, OperatorRef::Inline(_)));
    }

    #[test]
    fn defaults_fill_the_task_block() {
        let mut cfg = ScenarioConfig::default();
        cfg.prepare(TaskKind::Dissipative).unwrap();
        assert!(cfg.dissipative.unwrap().lambda.is_some());
    }

    #[test]
    fn unknown_observable_is_a_config_error() {
        let mut cfg = ScenarioConfig::from_json(r#"{"derive": {"function": "log", "A": "nope", "B": "H", "fd_step": 1e-6, "series_order": 4}}"#)
            .unwrap();
        assert_eq!(cfg.prepare(TaskKind::Derive).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn frequency_grid_includes_endpoints() {
        let g = FrequencyGrid { start: -1.0, end: 1.0, points: 5 };
        assert_eq!(g.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
