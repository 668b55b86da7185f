//! Per-peer whitewash-level estimation and the adaptive initial reputation
//! derived from it.
//!
//! A peer looks at each neighbour's neighbourhood, subtracts the arrivals
//! explained by network growth and the departures of well-reputed peers,
//! and treats the remainder as whitewashers coming back under new names.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::payoff::{crossover_round_capped, Crossover, IdentityRegime, PayoffParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("average degree is zero")]
    DegenerateAverage,
    #[error("previous network size must be at least 1")]
    EmptyNetwork,
    #[error("neighbourhood is empty")]
    EmptyNeighborhood,
    #[error("no initial reputation meets the budget: {0}")]
    Infeasible(String),
}

/// Default round budget for [`r_ini_min_from_frontier`].
pub const DEFAULT_ROUND_BUDGET: u64 = 50;

/// What a peer learns about one neighbour's neighbourhood over the last
/// iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodObservation {
    pub neighbor: NodeId,
    pub prev_size: usize,
    pub cur_size: usize,
    pub arrivals: usize,
    pub legit_departures: usize,
    pub local_growth: f64,
}

/// Growth factor of a neighbourhood whose members have average degree
/// `d_local`, when the network grew from `n_prev` to `n_cur` peers.
///
/// Only the growth part is scaled by the degree ratio, so a static network
/// yields exactly 1 everywhere.
pub fn local_growth_rate(
    d_local: f64,
    d_avg: f64,
    n_cur: f64,
    n_prev: f64,
) -> Result<f64, EstimatorError> {
    if !(d_avg > 0.0) {
        return Err(EstimatorError::DegenerateAverage);
    }
    if !(n_prev >= 1.0) {
        return Err(EstimatorError::EmptyNetwork);
    }
    Ok(1.0 + (d_local / d_avg) * (n_cur / n_prev - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepartureClass {
    Legitimate,
    PotentialWhitewasher,
}

/// A departing peer at or above the midpoint of the offer range is assumed
/// to have earned its reputation.
pub fn classify_departure(rep: f64, r_ini_max: f64, r_ini_min: f64) -> DepartureClass {
    if rep >= (r_ini_max + r_ini_min) / 2.0 {
        DepartureClass::Legitimate
    } else {
        DepartureClass::PotentialWhitewasher
    }
}

/// Unexplained arrivals per neighbourhood slot, clamped to `[0, 1]`.
pub fn whitewash_level(obs: &[NeighborhoodObservation]) -> Result<f64, EstimatorError> {
    let (num, den) = obs.iter().fold((0.0, 0usize), |(num, den), o| {
        let expected = o.prev_size as f64 * (o.local_growth - 1.0);
        (num + o.arrivals as f64 - expected - o.legit_departures as f64, den + o.cur_size)
    });
    if den == 0 {
        return Err(EstimatorError::EmptyNeighborhood);
    }
    Ok((num / den as f64).clamp(0.0, 1.0))
}

/// `(1 - w / w_max)^2 * r_ini_max`, floored at `r_ini_min`. Levels above
/// `w_max` count as `w_max`.
pub fn initial_reputation(w: f64, w_max: f64, r_ini_max: f64, r_ini_min: f64) -> f64 {
    let ratio = if w_max > 0.0 {
        (w / w_max).clamp(0.0, 1.0)
    } else if w > 0.0 {
        1.0
    } else {
        0.0
    };
    let raw = (1.0 - ratio).powi(2) * r_ini_max;
    raw.max(r_ini_min)
}

/// The newest newcomer statistic if there is one, else the previous value.
pub fn estimate_r_ini_max(newcomer_mean_rep: Option<f64>, prev: f64) -> f64 {
    newcomer_mean_rep.unwrap_or(prev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub owner: NodeId,
    window: VecDeque<f64>,
    window_len: usize,
    w_max: f64,
    pub r_ini_max: f64,
    pub r_ini_min: f64,
    current_offer: f64,
}

impl EstimatorState {
    /// A fresh state normalises against `r_ini_max` and offers it in full.
    pub fn new(owner: NodeId, window_len: usize, r_ini_max: f64, r_ini_min: f64) -> Self {
        EstimatorState {
            owner,
            window: VecDeque::with_capacity(window_len.max(1)),
            window_len: window_len.max(1),
            w_max: r_ini_max,
            r_ini_max,
            r_ini_min,
            current_offer: r_ini_max.max(r_ini_min),
        }
    }

    pub fn window(&self) -> &VecDeque<f64> {
        &self.window
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn current_offer(&self) -> f64 {
        self.current_offer
    }

    /// Pushes a level into the sliding window and returns the new maximum.
    pub fn update_w_max(&mut self, w_new: f64) -> f64 {
        if self.window.len() == self.window_len {
            self.window.pop_front();
        }
        self.window.push_back(w_new);
        self.w_max = self.window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.w_max
    }

    /// Offer for level `w` against the current window maximum.
    pub fn initial_reputation(&self, w: f64) -> f64 {
        initial_reputation(w, self.w_max, self.r_ini_max, self.r_ini_min)
    }

    /// One estimation cycle: record the level, then refresh the offer.
    pub fn observe(&mut self, w: f64) -> f64 {
        self.update_w_max(w);
        self.current_offer = self.initial_reputation(w);
        self.current_offer
    }
}

/// Largest initial reputation for which a cooperator under free identities
/// overtakes a whitewasher within `round_budget` rounds, at the best
/// allocation exponent.
///
/// A budget of one round admits no grant at all and yields 0.
pub fn r_ini_min_from_frontier(mu: f64, m_ratio: f64, round_budget: u64) -> Result<f64, EstimatorError> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(EstimatorError::Infeasible(format!("mu = {mu} not in (0, 1]")));
    }
    if round_budget <= 1 {
        return Ok(0.0);
    }
    let within_budget = |x: f64, r_ini: f64| {
        let p = PayoffParams { mu, x, m: m_ratio, m_prime: 1.0, r_ini, ..PayoffParams::default() };
        matches!(
            crossover_round_capped(&p, IdentityRegime::ZeroCost, round_budget),
            Crossover::Round(k) if k <= round_budget
        )
    };
    let mut best: Option<f64> = None;
    for step in 1..=100 {
        let x = step as f64 / 100.0;
        if !within_budget(x, 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        if within_budget(x, hi) {
            lo = hi;
        } else {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if within_budget(x, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        best = Some(best.map_or(lo, |b: f64| b.max(lo)));
    }
    best.filter(|&r| r > 0.0).ok_or_else(|| {
        EstimatorError::Infeasible(format!(
            "no exponent lets cooperation win within {round_budget} rounds at mu = {mu}"
        ))
    })
}
