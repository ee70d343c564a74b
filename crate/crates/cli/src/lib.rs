//! Command-line front end for `hyperop-core`: scenario files, task dispatch,
//! reproducible artifacts and the acceptance suite.

pub mod config;
pub mod error;
pub mod output;
pub mod tasks;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use log::info;

pub use config::{Format, ScenarioConfig, TaskKind};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "hyperop", version, about = "Quantum analysis on finite-dimensional operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for artifacts; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Seed for random ensembles (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for frequency grids, time grids and criteria.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Quantum derivative of f at A in direction B, with oracle checks.
    Derive,
    /// Operator Taylor partial sums of f(A + xB).
    Taylor,
    /// Conductivity sigma(omega) over a frequency grid.
    Response,
    /// Entropy-operator expansion under an adiabatically switched force.
    Zubarev,
    /// Damped evolution and its entropy operator.
    Dissipative,
    /// Runs the acceptance criteria.
    VerifyAll,
    /// Prints the JSON schema of scenario files.
    Schema,
}

impl Command {
    fn task(self) -> Option<TaskKind> {
        match self {
            Command::Derive => Some(TaskKind::Derive),
            Command::Taylor => Some(TaskKind::Taylor),
            Command::Response => Some(TaskKind::Response),
            Command::Zubarev => Some(TaskKind::Zubarev),
            Command::Dissipative => Some(TaskKind::Dissipative),
            Command::VerifyAll => Some(TaskKind::VerifyAll),
            Command::Schema => None,
        }
    }
}

/// Runs one invocation. Artifacts are only written once the task has
/// succeeded (or, for `verify-all`, has produced its report).
pub fn run(cli: &Cli) -> CliResult<()> {
    let Some(task) = cli.command.task() else {
        let text = serde_json::to_string_pretty(&config::schema()).expect("schema serializes");
        println!("{text}");
        return Ok(());
    };
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.clone());
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let model = cfg.prepare(task)?;
    info!("running {} on a {}-dimensional model", task.name(), model.hamiltonian.dim());

    let mut verification = None;
    let out = match task {
        TaskKind::Derive => tasks::derive(&cfg, &model)?,
        TaskKind::Taylor => tasks::taylor(&cfg, &model)?,
        TaskKind::Response => tasks::response(&cfg, &model)?,
        TaskKind::Zubarev => tasks::zubarev(&cfg, &model)?,
        TaskKind::Dissipative => tasks::dissipative(&cfg, &model)?,
        TaskKind::VerifyAll => {
            let reports = verify::run_all(cfg.seed);
            for r in &reports {
                eprintln!("{}", r.line());
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                verification = Some(CliError::Verification { failed, total: reports.len() });
            }
            verify::to_output(cfg.seed, &reports)
        }
    };
    let text = output::render(task.name(), &cfg, &out, cfg.output.format)?;
    match &cfg.output.path {
        Some(dir) => {
            let name = format!("{}.{}", task.name(), cfg.output.format.extension());
            let path = output::write_atomic(dir, &name, &text)?;
            info!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    verification.map_or(Ok(()), Err)
}
