//! Batch runs over a list of scenarios and seeds.

use std::path::{Path, PathBuf};

use serde::Serialize;
use whitewash_core::engine::{run, IterationRecord, SimConfig, TopologyConfig};
use whitewash_core::graph::TopologyKind;

use crate::config::{Axis, GridPreset};
use crate::csvio::{emit_csv, write_rows_to};
use crate::CliError;

/// Leading iterations averaged for the starting whitewash level.
pub const EARLY_WINDOW: usize = 10;
/// Trailing iterations averaged for the settled whitewash level.
pub const LATE_WINDOW: usize = 100;

pub const SUMMARY_HEADER: [&str; 7] = [
    "scenario",
    "seeds",
    "first10_mean_whitewash_fraction",
    "final100_mean_whitewash_fraction",
    "suppression_factor",
    "final100_mean_offered_r_ini",
    "r_ini_min",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub scenario: String,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
}

/// Per-scenario averages over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub seeds: usize,
    pub first10_mean_whitewash_fraction: f64,
    pub final100_mean_whitewash_fraction: f64,
    /// Early over late mean; infinite when whitewashing stops entirely.
    pub suppression_factor: f64,
    pub final100_mean_offered_r_ini: f64,
    pub r_ini_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub cells: Vec<CellRun>,
    pub summary: Vec<SummaryRow>,
}

/// The fixed scenario list of [`GridPreset::Baseline`], built on `base`.
pub fn preset_scenarios(base: &SimConfig, preset: GridPreset) -> Vec<Scenario> {
    match preset {
        GridPreset::Baseline => {
            let mut out = Vec::new();
            for growth in [0u32, 2, 5, 8] {
                out.push(Scenario {
                    name: format!("scale_free_growth{growth}"),
                    config: SimConfig {
                        topology: TopologyConfig { kind: TopologyKind::ScaleFree, ..base.topology.clone() },
                        growth_percent_per_10: f64::from(growth),
                        ..base.clone()
                    },
                });
            }
            for n in [1000usize, 5000, 10000] {
                out.push(Scenario {
                    name: format!("regular_n{n}"),
                    config: SimConfig {
                        topology: TopologyConfig { kind: TopologyKind::Regular, n, ..base.topology.clone() },
                        growth_percent_per_10: 0.0,
                        ..base.clone()
                    },
                });
            }
            out
        }
    }
}

/// One scenario per axis value, each `base` with the dotted path
/// `axis.parameter` replaced.
pub fn axis_scenarios(base: &SimConfig, axis: &Axis) -> Result<Vec<Scenario>, CliError> {
    let path: Vec<&str> = axis.parameter.split('.').collect();
    let label = path.last().copied().unwrap_or_default();
    let mut out = Vec::new();
    for value in &axis.values {
        let mut tree = serde_json::to_value(base).expect("config serializes");
        let mut slot = &mut tree;
        for key in &path {
            slot = slot
                .get_mut(*key)
                .ok_or_else(|| CliError::Invalid(vec![format!("axis parameter `{}` is not a config field", axis.parameter)]))?;
        }
        *slot = value.clone();
        let config: SimConfig = serde_json::from_value(tree).map_err(|e| {
            CliError::Invalid(vec![format!("axis value {value} for `{}`: {e}", axis.parameter)])
        })?;
        let shown = match value {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        out.push(Scenario { name: format!("{label}_{shown}"), config });
    }
    Ok(out)
}

/// Every violated constraint across all scenarios and seeds.
pub fn grid_violations(scenarios: &[Scenario], seeds: &[u64]) -> Vec<String> {
    let mut v = Vec::new();
    if scenarios.is_empty() {
        v.push("no scenarios to run".into());
    }
    if seeds.is_empty() {
        v.push("no seeds to run".into());
    }
    for s in scenarios {
        v.extend(s.config.violations().into_iter().map(|m| format!("{}: {m}", s.name)));
    }
    v
}

/// Runs every scenario under every seed in order; `progress` sees each
/// finished cell.
pub fn scenario_grid(
    scenarios: &[Scenario],
    seeds: &[u64],
    mut progress: impl FnMut(&CellRun),
) -> Result<GridResult, CliError> {
    let v = grid_violations(scenarios, seeds);
    if !v.is_empty() {
        return Err(CliError::Invalid(v));
    }
    let mut cells = Vec::new();
    let mut summary = Vec::new();
    for s in scenarios {
        let start = cells.len();
        for &seed in seeds {
            let records = run(&SimConfig { seed, ..s.config.clone() })?;
            let cell = CellRun { scenario: s.name.clone(), seed, records };
            progress(&cell);
            cells.push(cell);
        }
        summary.push(summarize(&s.name, s.config.r_ini_min, &cells[start..]));
    }
    Ok(GridResult { cells, summary })
}

fn summarize(name: &str, r_ini_min: f64, runs: &[CellRun]) -> SummaryRow {
    let per_seed = |f: &dyn Fn(&[IterationRecord]) -> f64| {
        runs.iter().map(|c| f(&c.records)).sum::<f64>() / runs.len() as f64
    };
    let early = per_seed(&|r| mean(head(r, EARLY_WINDOW), |x| x.whitewash_fraction));
    let late = per_seed(&|r| mean(tail(r, LATE_WINDOW), |x| x.whitewash_fraction));
    let offer = per_seed(&|r| mean(tail(r, LATE_WINDOW), |x| x.mean_offered_r_ini));
    SummaryRow {
        scenario: name.to_owned(),
        seeds: runs.len(),
        first10_mean_whitewash_fraction: early,
        final100_mean_whitewash_fraction: late,
        suppression_factor: if late > 0.0 { early / late } else { f64::INFINITY },
        final100_mean_offered_r_ini: offer,
        r_ini_min,
    }
}

fn head(r: &[IterationRecord], k: usize) -> &[IterationRecord] {
    &r[..k.min(r.len())]
}

fn tail(r: &[IterationRecord], k: usize) -> &[IterationRecord] {
    &r[r.len().saturating_sub(k)..]
}

fn mean(r: &[IterationRecord], f: impl Fn(&IterationRecord) -> f64) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    r.iter().map(f).sum::<f64>() / r.len() as f64
}

pub fn cell_file_name(scenario: &str, seed: u64) -> String {
    format!("{scenario}_seed{seed}.csv")
}

/// One CSV per cell plus `summary.csv`, written after all runs finish.
pub fn write_grid(result: &GridResult, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for cell in &result.cells {
        let path = out_dir.join(cell_file_name(&cell.scenario, cell.seed));
        emit_csv(&cell.records, &path)?;
        written.push(path);
    }
    let path = out_dir.join("summary.csv");
    write_rows_to(&path, &SUMMARY_HEADER, &result.summary)?;
    written.push(path);
    Ok(written)
}
