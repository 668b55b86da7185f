//! Table builders for the non-simulation subcommands.

use std::fmt::Write as _;

use serde::Serialize;
use whitewash_core::engine::{closed_world_estimator_check, SimConfig};
use whitewash_core::game::{
    best_randomization_span, expected_payoffs, expected_payoffs_dp, fixed_point, indifference_residual,
    pure_strategy_analysis, GameError, GameSpec, MixedProfile, RESIDUAL_TOLERANCE,
};
use whitewash_core::payoff::{crossover_round_capped, max_feasible_r_ini, IdentityRegime, PayoffParams};

use crate::config::{EstimatorCheckConfig, FixedPointConfig, FrontierConfig, GameReportConfig, PayoffSweepConfig};
use crate::CliError;

pub const SWEEP_HEADER: [&str; 6] = ["x", "r_ini", "regime", "mu", "z_over_c", "k_crossover"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x: f64,
    pub r_ini: f64,
    pub regime: IdentityRegime,
    pub mu: f64,
    pub z_over_c: f64,
    /// Round number, or `inf` when the cooperator never catches up.
    pub k_crossover: String,
}

/// Crossover round over the full parameter product. Regimes other than
/// finite cost ignore the identity price and get one row with `z_over_c = 0`.
pub fn payoff_sweep(cfg: &PayoffSweepConfig) -> Result<Vec<SweepRow>, CliError> {
    let mut cells = Vec::new();
    let mut problems = Vec::new();
    for &mu in &cfg.mu {
        for &x in &cfg.x {
            for &r_ini in &cfg.r_ini {
                for &regime in &cfg.regimes {
                    let prices: &[f64] = if regime == IdentityRegime::FiniteCost { &cfg.z_over_c } else { &[0.0] };
                    for &z_over_c in prices {
                        let p = PayoffParams {
                            mu,
                            x,
                            c: cfg.c,
                            delta: cfg.delta,
                            z: z_over_c * cfg.c,
                            m: cfg.m,
                            m_prime: cfg.m_prime,
                            r_ini,
                        };
                        match p.validate(regime) {
                            Ok(()) => cells.push((p, regime, z_over_c)),
                            Err(e) => problems.push(format!("mu={mu} x={x} r_ini={r_ini} {regime}: {e}")),
                        }
                    }
                }
            }
        }
    }
    if cfg.round_cap == 0 {
        problems.push("round_cap must be at least 1".into());
    }
    if !problems.is_empty() {
        return Err(CliError::Invalid(problems));
    }
    Ok(cells
        .into_iter()
        .map(|(p, regime, z_over_c)| SweepRow {
            x: p.x,
            r_ini: p.r_ini,
            regime,
            mu: p.mu,
            z_over_c,
            k_crossover: crossover_round_capped(&p, regime, cfg.round_cap).to_string(),
        })
        .collect())
}

pub const GAME_HEADER: [&str; 9] = [
    "kappa",
    "rounds",
    "player",
    "honesty",
    "uniform_probability",
    "indifference_residual",
    "is_equilibrium",
    "payoff_enumeration",
    "payoff_dp",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameRow {
    pub kappa: usize,
    pub rounds: usize,
    pub player: usize,
    pub honesty: f64,
    pub uniform_probability: f64,
    pub indifference_residual: f64,
    pub is_equilibrium: bool,
    /// Empty when the assignment space is too large to enumerate.
    pub payoff_enumeration: Option<f64>,
    pub payoff_dp: f64,
}

/// Value a published three-player table gives the lowest-honesty player
/// over three rounds, in units of `r_ini_max`. Enumeration disagrees; the
/// report shows both.
pub const PLAYER_C_REFERENCE: f64 = 18.0 / 81.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GameReport {
    pub rows: Vec<GameRow>,
    pub text: String,
}

pub fn game_report(cfg: &GameReportConfig) -> Result<GameReport, CliError> {
    let mut problems = Vec::new();
    for &k in &cfg.kappa {
        for &r in &cfg.rounds {
            if let Err(e) = GameSpec::ladder(k, r, cfg.r_ini_max, cfg.r_ini_min).validate() {
                problems.push(format!("kappa={k} rounds={r}: {e}"));
            }
            if r < 2 {
                problems.push(format!("kappa={k} rounds={r}: randomising needs at least two rounds"));
            }
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Invalid(problems));
    }

    let mut rows = Vec::new();
    let mut text = String::new();
    let _ = writeln!(text, "timing game report: r_ini_max = {}, r_ini_min = {}", cfg.r_ini_max, cfg.r_ini_min);
    for &k in &cfg.kappa {
        let one_shot = GameSpec::ladder(k, k, cfg.r_ini_max, cfg.r_ini_min);
        let _ = writeln!(text, "\n== kappa = {k} ==");
        let _ = writeln!(text, "offer ladder: {}", join(&one_shot.honesty));
        let dom = pure_strategy_analysis(&one_shot)?;
        let _ = writeln!(text, "one-shot pure strategies (1 = whitewash):");
        for outcome in &dom.table {
            let acts: String = outcome.actions.iter().map(|&a| if a { '1' } else { '0' }).collect();
            let _ = writeln!(text, "  {acts}  payoffs {}", join(&outcome.payoffs));
        }
        let _ = writeln!(text, "whitewashing weakly dominant: {}", dom.whitewash_weakly_dominant);
        let _ = writeln!(text, "all whitewash: {}", join(&dom.all_whitewash_payoffs));
        let _ = writeln!(text, "after refusals: {}", join(&dom.collapsed_payoffs));
        if k >= 2 {
            let span = best_randomization_span(&one_shot)?;
            for (r, payoffs) in &span.payoffs_by_span {
                let _ = writeln!(text, "uniform over {r} rounds: {}", join(payoffs));
            }
            let _ = writeln!(text, "full span dominates: {}", span.full_span_dominates);
            let _ = writeln!(text, "whitewash every round vs uniform others: {}", join(&span.deviation_payoffs));
        }

        for &r in &cfg.rounds {
            let spec = one_shot.with_rounds(r);
            let profile = MixedProfile::uniform(k, r);
            let residual = indifference_residual(&spec, &profile);
            let enumerated = match expected_payoffs(&spec, &profile) {
                Ok(v) => Some(v),
                Err(GameError::TooLarge { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            let dp = expected_payoffs_dp(&spec, &profile)?;
            let _ = writeln!(
                text,
                "rounds = {r}: residual {residual:e} ({}), payoffs {}",
                if residual < RESIDUAL_TOLERANCE { "equilibrium" } else { "not an equilibrium" },
                join(&dp)
            );
            if k == 3 && r == 3 {
                let got = enumerated.as_ref().map_or(dp[2], |v| v[2]);
                let reference = PLAYER_C_REFERENCE * cfg.r_ini_max;
                let _ = writeln!(
                    text,
                    "player C check: enumeration {got} = 20/81 r_ini_max + 1/9 r_ini_min, \
                     reference 18/81 r_ini_max = {reference}, difference {}",
                    got - reference
                );
            }
            for j in 0..k {
                rows.push(GameRow {
                    kappa: k,
                    rounds: r,
                    player: j,
                    honesty: spec.honesty[j],
                    uniform_probability: 1.0 / r as f64,
                    indifference_residual: residual,
                    is_equilibrium: residual < RESIDUAL_TOLERANCE,
                    payoff_enumeration: enumerated.as_ref().map(|v| v[j]),
                    payoff_dp: dp[j],
                });
            }
        }
    }
    Ok(GameReport { rows, text })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

pub const FIXED_POINT_HEADER: [&str; 5] = ["r_ini_max", "r_ini_min", "w_max", "w_star", "offer_at_w_star"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointRow {
    pub r_ini_max: f64,
    pub r_ini_min: f64,
    pub w_max: f64,
    pub w_star: f64,
    pub offer_at_w_star: f64,
}

pub fn fixed_points(cfg: &FixedPointConfig) -> Result<Vec<FixedPointRow>, CliError> {
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for &w_max in &cfg.w_max {
        match fixed_point(cfg.r_ini_max, cfg.r_ini_min, w_max) {
            Ok(w_star) => rows.push(FixedPointRow {
                r_ini_max: cfg.r_ini_max,
                r_ini_min: cfg.r_ini_min,
                w_max,
                w_star,
                offer_at_w_star: ((1.0 - w_star / w_max).powi(2) * cfg.r_ini_max).max(cfg.r_ini_min),
            }),
            Err(e) => problems.push(format!("w_max={w_max}: {e}")),
        }
    }
    if problems.is_empty() {
        Ok(rows)
    } else {
        Err(CliError::Invalid(problems))
    }
}

pub const FRONTIER_HEADER: [&str; 4] = ["mu", "m_ratio", "r_star", "x_star"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierRow {
    pub mu: f64,
    pub m_ratio: f64,
    pub r_star: f64,
    pub x_star: f64,
}

pub fn frontier(cfg: &FrontierConfig) -> Result<Vec<FrontierRow>, CliError> {
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for &mu in &cfg.mu {
        match max_feasible_r_ini(mu, cfg.m_ratio) {
            Ok(p) => rows.push(FrontierRow { mu, m_ratio: cfg.m_ratio, r_star: p.r_star, x_star: p.x_star }),
            Err(e) => problems.push(format!("mu={mu}: {e}")),
        }
    }
    if problems.is_empty() {
        Ok(rows)
    } else {
        Err(CliError::Invalid(problems))
    }
}

pub const ESTIMATOR_HEADER: [&str; 8] =
    ["topology", "n", "growth_percent_per_10", "injected", "seed", "estimated", "truth", "abs_error"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorRow {
    pub topology: String,
    pub n: usize,
    pub growth_percent_per_10: f64,
    pub injected: usize,
    pub seed: u64,
    pub estimated: f64,
    pub truth: f64,
    pub abs_error: f64,
}

pub fn estimator_checks(cfg: &EstimatorCheckConfig) -> Result<Vec<EstimatorRow>, CliError> {
    let seeds = cfg.seeds();
    let mut problems = cfg.sim.violations();
    if seeds.is_empty() {
        problems.push("seeds must not be empty".into());
    }
    if !problems.is_empty() {
        return Err(CliError::Invalid(problems));
    }
    seeds
        .into_iter()
        .map(|seed| {
            let sim = SimConfig { seed, ..cfg.sim.clone() };
            let check = closed_world_estimator_check(&sim, cfg.injected)?;
            Ok(EstimatorRow {
                topology: sim.topology.kind.as_str().to_owned(),
                n: sim.topology.n,
                growth_percent_per_10: sim.growth_percent_per_10,
                injected: cfg.injected,
                seed,
                estimated: check.estimated,
                truth: check.truth,
                abs_error: (check.estimated - check.truth).abs(),
            })
        })
        .collect()
}
