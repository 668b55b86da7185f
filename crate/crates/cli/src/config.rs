//! JSON configuration for every subcommand. Each schema fills unset keys
//! with defaults, so an empty file (or `{}`) is a valid config.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use whitewash_core::engine::SimConfig;
use whitewash_core::payoff::{IdentityRegime, PayoffParams, DEFAULT_ROUND_CAP};

use crate::CliError;

/// A config file schema.
pub trait ConfigSchema: DeserializeOwned {
    /// Every accepted top-level key, for schemas whose flattened fields
    /// keep serde from rejecting unknown keys itself.
    fn top_level_keys() -> Option<Vec<String>> {
        None
    }
}

fn sim_keys(extra: &[&str]) -> Vec<String> {
    let tree = serde_json::to_value(SimConfig::default()).expect("config serializes");
    let mut keys: Vec<String> = tree.as_object().expect("struct is an object").keys().cloned().collect();
    keys.extend(extra.iter().map(|k| k.to_string()));
    keys
}

/// Reads and deserializes `path`; whitespace-only files count as `{}`.
pub fn parse_config<T: ConfigSchema>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
    parse_config_str(&text).map_err(|e| match e {
        CliError::Parse { line, column, message, .. } => {
            CliError::Parse { source_name: path.display().to_string(), line, column, message }
        }
        other => other,
    })
}

pub fn parse_config_str<T: ConfigSchema>(text: &str) -> Result<T, CliError> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let parse_error = |line, column, message| CliError::Parse { source_name: "<config>".into(), line, column, message };
    let value: T = serde_json::from_str(text).map_err(|e| parse_error(e.line(), e.column(), e.to_string()))?;
    if let Some(allowed) = T::top_level_keys() {
        let tree: serde_json::Value = serde_json::from_str(text).expect("already parsed");
        if let Some(obj) = tree.as_object() {
            if let Some(key) = obj.keys().find(|k| !allowed.contains(k)) {
                let (line, column) = locate(text, &format!("\"{key}\""));
                return Err(parse_error(line, column, format!("unknown field `{key}`, expected one of {}", allowed.join(", "))));
            }
        }
    }
    Ok(value)
}

/// 1-based line and column of the first occurrence of `needle`.
fn locate(text: &str, needle: &str) -> (usize, usize) {
    let at = text.find(needle).unwrap_or(0);
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let column = at - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// A preset list of scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    /// Scale-free growth at 0, 2, 5 and 8 percent, and static regular
    /// networks of 1000, 5000 and 10000 peers.
    Baseline,
}

/// One parameter varied over a list of values. `parameter` is a dotted
/// path into the simulation config, such as `topology.n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub sim: SimConfig,
    pub grid: Option<GridPreset>,
    pub axis: Option<Axis>,
    /// Seeds to run every scenario with; `sim.seed` alone when absent.
    pub seeds: Option<Vec<u64>>,
}

impl ConfigSchema for SimulateConfig {
    fn top_level_keys() -> Option<Vec<String>> {
        Some(sim_keys(&["grid", "axis", "seeds"]))
    }
}

impl SimulateConfig {
    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.sim.seed])
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.sim.violations();
        if self.grid.is_some() && self.axis.is_some() {
            v.push("grid and axis are mutually exclusive".into());
        }
        if self.seeds.as_ref().is_some_and(Vec::is_empty) {
            v.push("seeds must not be empty".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayoffSweepConfig {
    pub mu: Vec<f64>,
    pub x: Vec<f64>,
    pub r_ini: Vec<f64>,
    pub regimes: Vec<IdentityRegime>,
    /// Identity price in units of `c`; only the finite-cost regime reads it.
    pub z_over_c: Vec<f64>,
    pub c: f64,
    pub delta: f64,
    pub m: f64,
    pub m_prime: f64,
    pub round_cap: u64,
}

impl ConfigSchema for PayoffSweepConfig {}

impl Default for PayoffSweepConfig {
    fn default() -> Self {
        let base = PayoffParams::default();
        PayoffSweepConfig {
            mu: vec![0.5],
            x: (1..=20).map(|i| i as f64 / 20.0).collect(),
            r_ini: vec![0.01, 0.03, 0.1, 0.3],
            regimes: IdentityRegime::ALL.to_vec(),
            z_over_c: vec![0.5, 1.0, 10.0],
            c: base.c,
            delta: base.delta,
            m: base.m,
            m_prime: base.m_prime,
            round_cap: DEFAULT_ROUND_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameReportConfig {
    /// Player counts.
    pub kappa: Vec<usize>,
    /// Randomisation spans.
    pub rounds: Vec<usize>,
    pub r_ini_max: f64,
    pub r_ini_min: f64,
}

impl ConfigSchema for GameReportConfig {}

impl Default for GameReportConfig {
    fn default() -> Self {
        GameReportConfig { kappa: vec![2, 3, 4], rounds: vec![2, 3, 4], r_ini_max: 0.5, r_ini_min: 0.03 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointConfig {
    pub r_ini_max: f64,
    pub r_ini_min: f64,
    pub w_max: Vec<f64>,
}

impl ConfigSchema for FixedPointConfig {}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { r_ini_max: 0.5, r_ini_min: 0.03, w_max: (1..=10).map(|i| i as f64 / 10.0).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierConfig {
    pub mu: Vec<f64>,
    /// `m / m'`.
    pub m_ratio: f64,
}

impl ConfigSchema for FrontierConfig {}

impl Default for FrontierConfig {
    fn default() -> Self {
        FrontierConfig { mu: vec![0.3, 0.5, 0.7], m_ratio: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorCheckConfig {
    #[serde(flatten)]
    pub sim: SimConfig,
    /// Peers forced to whitewash once.
    pub injected: usize,
    pub seeds: Option<Vec<u64>>,
}

impl Default for EstimatorCheckConfig {
    fn default() -> Self {
        EstimatorCheckConfig { sim: SimConfig::default(), injected: 50, seeds: None }
    }
}

impl ConfigSchema for EstimatorCheckConfig {
    fn top_level_keys() -> Option<Vec<String>> {
        Some(sim_keys(&["injected", "seeds"]))
    }
}

impl EstimatorCheckConfig {
    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.sim.seed])
    }
}
