//! Command dispatch for `p2psim`: configuration parsing, batch runs and
//! CSV output. `main.rs` only parses flags and reports errors.

pub mod analytics;
pub mod config;
pub mod csvio;
pub mod grid;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use thiserror::Error;
use whitewash_core::engine::EngineError;
use whitewash_core::game::GameError;
use whitewash_core::payoff::PayoffError;

use crate::analytics::*;
use crate::config::*;
use crate::csvio::write_rows_to;
use crate::grid::{axis_scenarios, preset_scenarios, scenario_grid, write_grid, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse { source_name: String, line: usize, column: usize, message: String },
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
    #[error(transparent)]
    Game(#[from] GameError),
}

impl CliError {
    /// Stable tag for the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Invalid(_) => "validation",
            CliError::Csv(_) => "csv",
            CliError::Engine(EngineError::InvalidConfig(_)) => "validation",
            CliError::Engine(_) => "engine",
            CliError::Payoff(_) => "payoff",
            CliError::Game(_) => "game",
        }
    }

    /// Individual problems for validation failures, the message otherwise.
    pub fn details(&self) -> Vec<String> {
        match self {
            CliError::Invalid(v) | CliError::Engine(EngineError::InvalidConfig(v)) => v.clone(),
            other => vec![other.to_string()],
        }
    }

    /// One-line JSON object: `{"error": kind, "message": ..., "details": [...]}`.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            message: String,
            details: Vec<String>,
        }
        serde_json::to_string(&Line { error: self.kind(), message: self.to_string(), details: self.details() })
            .expect("strings serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    PayoffSweep,
    GameReport,
    FixedPoint,
    Frontier,
    EstimatorCheck,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub command: Command,
    pub config_path: PathBuf,
    pub output_dir: PathBuf,
    /// Replaces the configured seed list with this single seed.
    pub seed_override: Option<u64>,
    pub quiet: bool,
}

/// Runs one command and returns the files it wrote.
pub fn execute(m: &RunManifest) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&m.output_dir).map_err(|source| CliError::Io { path: m.output_dir.clone(), source })?;
    let out = m.output_dir.as_path();
    let log = |msg: &str| {
        if !m.quiet {
            eprintln!("{msg}");
        }
    };
    match m.command {
        Command::Simulate => {
            let mut cfg: SimulateConfig = parse_config(&m.config_path)?;
            if let Some(seed) = m.seed_override {
                cfg.seeds = Some(vec![seed]);
            }
            let v = cfg.violations();
            if !v.is_empty() {
                return Err(CliError::Invalid(v));
            }
            let scenarios = match (&cfg.grid, &cfg.axis) {
                (Some(preset), _) => preset_scenarios(&cfg.sim, *preset),
                (None, Some(axis)) => axis_scenarios(&cfg.sim, axis)?,
                (None, None) => vec![Scenario { name: "base".into(), config: cfg.sim.clone() }],
            };
            let result = scenario_grid(&scenarios, &cfg.seeds(), |cell| {
                log(&format!("simulate: {} seed {} done", cell.scenario, cell.seed));
            })?;
            write_grid(&result, out)
        }
        Command::PayoffSweep => {
            let cfg: PayoffSweepConfig = parse_config(&m.config_path)?;
            let rows = payoff_sweep(&cfg)?;
            log(&format!("payoff-sweep: {} rows", rows.len()));
            single(out, "payoff_sweep.csv", &SWEEP_HEADER, &rows)
        }
        Command::GameReport => {
            let cfg: GameReportConfig = parse_config(&m.config_path)?;
            let report = game_report(&cfg)?;
            let mut files = single(out, "game_report.csv", &GAME_HEADER, &report.rows)?;
            let txt = out.join("game_report.txt");
            fs::write(&txt, &report.text).map_err(|source| CliError::Io { path: txt.clone(), source })?;
            files.push(txt);
            log("game-report: done");
            Ok(files)
        }
        Command::FixedPoint => {
            let cfg: FixedPointConfig = parse_config(&m.config_path)?;
            let rows = fixed_points(&cfg)?;
            single(out, "fixed_point.csv", &FIXED_POINT_HEADER, &rows)
        }
        Command::Frontier => {
            let cfg: FrontierConfig = parse_config(&m.config_path)?;
            let rows = frontier(&cfg)?;
            single(out, "frontier.csv", &FRONTIER_HEADER, &rows)
        }
        Command::EstimatorCheck => {
            let mut cfg: EstimatorCheckConfig = parse_config(&m.config_path)?;
            if let Some(seed) = m.seed_override {
                cfg.seeds = Some(vec![seed]);
            }
            let rows = estimator_checks(&cfg)?;
            for r in &rows {
                log(&format!("estimator-check: seed {} error {:e}", r.seed, r.abs_error));
            }
            single(out, "estimator_check.csv", &ESTIMATOR_HEADER, &rows)
        }
    }
}

fn single<T: Serialize>(dir: &Path, name: &str, header: &[&str], rows: &[T]) -> Result<Vec<PathBuf>, CliError> {
    let path = dir.join(name);
    write_rows_to(&path, header, rows)?;
    Ok(vec![path])
}
