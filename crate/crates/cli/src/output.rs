//! Artifacts: a summary object plus one table, rendered as JSON or CSV and
//! written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, ScenarioConfig};
use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            // 17 significant digits round-trip every f64
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// What a task produces before rendering.
#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub summary: Value,
    pub table: Table,
}

#[derive(Serialize)]
struct Artifact<'a> {
    program: &'static str,
    version: &'static str,
    task: &'a str,
    config: &'a ScenarioConfig,
    summary: &'a Value,
    table: &'a Table,
}

pub fn render(task: &str, config: &ScenarioConfig, out: &TaskOutput, format: Format) -> CliResult<String> {
    let echo = config.echo();
    match format {
        Format::Json => {
            let artifact = Artifact {
                program: "hyperop",
                version: VERSION,
                task,
                config: &echo,
                summary: &out.summary,
                table: &out.table,
            };
            let mut text = serde_json::to_string_pretty(&artifact).expect("artifact serializes");
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let mut buf = Vec::new();
            writeln!(buf, "# hyperop {VERSION}").ok();
            writeln!(buf, "# task: {task}").ok();
            writeln!(buf, "# config: {}", serde_json::to_string(&echo).expect("config serializes")).ok();
            writeln!(buf, "# summary: {}", serde_json::to_string(&out.summary).expect("summary serializes")).ok();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                let io = |e: csv::Error| CliError::Io { path: PathBuf::from("<csv>"), source: e.into() };
                w.write_record(&out.table.columns).map_err(io)?;
                for row in &out.table.rows {
                    w.write_record(row.iter().map(Cell::csv_field)).map_err(io)?;
                }
                w.flush().map_err(|e| CliError::Io { path: PathBuf::from("<csv>"), source: e })?;
            }
            Ok(String::from_utf8(buf).expect("csv output is utf-8"))
        }
    }
}

/// Writes `contents` to `dir/name` through a temporary file in the same
/// directory, so a failed run never leaves a partial artifact behind.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(dir))?;
    tmp.write_all(contents.as_bytes()).map_err(io(&target))?;
    tmp.as_file().sync_all().map_err(io(&target))?;
    tmp.persist(&target).map_err(|e| CliError::Io { path: target.clone(), source: e.error })?;
    Ok(target)
}
