//! Expected-value payoff economics of cooperating versus defecting under
//! permanent, free and priced identities.
//!
//! All quantities are per-peer expectations in a large network with mean
//! reputation `mu`, where a request is honoured with probability
//! `reputation^x`. A cooperative peer serves `m` requests per round and
//! issues `m_prime`; it is paid at its initial reputation in the first round
//! and at the earned reputation `mu^x` afterwards. A defector is only ever
//! paid at the initial reputation, once if identities are permanent and
//! every round if it can whitewash.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PayoffError {
    #[error("invalid payoff parameters: {0}")]
    InvalidParams(String),
    #[error("no initial reputation is feasible: {0}")]
    Infeasible(String),
}

/// Default search cap for [`crossover_round`].
pub const DEFAULT_ROUND_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PayoffParams {
    /// Mean reputation of the network.
    pub mu: f64,
    /// Allocation exponent.
    pub x: f64,
    /// Resource quantum per request.
    pub c: f64,
    /// Small per-round gain from any completed transaction.
    pub delta: f64,
    /// Price of a fresh identity.
    pub z: f64,
    /// Requests served per round.
    pub m: f64,
    /// Requests issued per round.
    pub m_prime: f64,
    pub r_ini: f64,
}

impl Default for PayoffParams {
    fn default() -> Self {
        PayoffParams { mu: 0.5, x: 0.5, c: 1.0, delta: 1e-6, z: 0.0, m: 1.0, m_prime: 1.0, r_ini: 0.03 }
    }
}

impl PayoffParams {
    pub fn validate(&self, regime: IdentityRegime) -> Result<(), PayoffError> {
        let mut problems = Vec::new();
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            problems.push(format!("mu = {} not in (0, 1]", self.mu));
        }
        if !(self.x > 0.0 && self.x <= 1.0) {
            problems.push(format!("x = {} not in (0, 1]", self.x));
        }
        if !(self.c > 0.0) {
            problems.push(format!("c = {} must be positive", self.c));
        }
        if !(self.delta >= 0.0) {
            problems.push(format!("delta = {} must be non-negative", self.delta));
        }
        if !(self.m >= 0.0 && self.m_prime >= 0.0) {
            problems.push("request counts must be non-negative".to_string());
        }
        if !(0.0..=1.0).contains(&self.r_ini) {
            problems.push(format!("r_ini = {} not in [0, 1]", self.r_ini));
        }
        match regime {
            IdentityRegime::FiniteCost if !(self.z > 0.0) => {
                problems.push(format!("finite-cost identities need z > 0, got {}", self.z))
            }
            IdentityRegime::ZeroCost if self.z != 0.0 => {
                problems.push(format!("zero-cost identities need z = 0, got {}", self.z))
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PayoffError::InvalidParams(problems.join("; ")))
        }
    }

    /// Expected service a peer owes per request it receives.
    fn service_cost(&self) -> f64 {
        allocation_probability(self.mu, self.x) * self.c
    }

    /// Expected return per request for a peer holding the earned reputation.
    fn earned_return(&self) -> f64 {
        allocation_probability(allocation_probability(self.mu, self.x), self.x) * self.c
    }

    /// Expected return per request at the initial reputation.
    fn newcomer_return(&self) -> f64 {
        allocation_probability(self.r_ini, self.x) * self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityRegime {
    Permanent,
    ZeroCost,
    FiniteCost,
}

impl IdentityRegime {
    pub const ALL: [IdentityRegime; 3] =
        [IdentityRegime::Permanent, IdentityRegime::ZeroCost, IdentityRegime::FiniteCost];

    pub fn as_str(&self) -> &'static str {
        match self {
            IdentityRegime::Permanent => "permanent",
            IdentityRegime::ZeroCost => "zero_cost",
            IdentityRegime::FiniteCost => "finite_cost",
        }
    }
}

impl fmt::Display for IdentityRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `rep^x`.
pub fn allocation_probability(rep: f64, x: f64) -> f64 {
    rep.powf(x)
}

/// Cooperative peer's cumulative expected payoff after `k` rounds.
pub fn coop_payoff(p: &PayoffParams, k: u64, regime: IdentityRegime) -> f64 {
    let k = k as f64;
    let entry = if regime == IdentityRegime::FiniteCost { p.z } else { 0.0 };
    -k * p.m * p.service_cost()
        + (k - 1.0) * p.m_prime * p.earned_return()
        + p.m_prime * p.newcomer_return()
        + k * p.delta
        - entry
}

/// Defector's cumulative expected payoff after `k` rounds.
pub fn defector_payoff(p: &PayoffParams, k: u64, regime: IdentityRegime) -> f64 {
    let k = k as f64;
    let per_round = p.m_prime * p.newcomer_return() + p.delta;
    match regime {
        IdentityRegime::Permanent => per_round,
        IdentityRegime::ZeroCost => k * per_round,
        IdentityRegime::FiniteCost => k * (per_round - p.z),
    }
}

/// First round at which cooperation has caught up with defection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossover {
    Round(u64),
    Unbounded,
}

impl Crossover {
    pub fn round(&self) -> Option<u64> {
        match self {
            Crossover::Round(k) => Some(*k),
            Crossover::Unbounded => None,
        }
    }
}

impl fmt::Display for Crossover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Crossover::Round(k) => write!(f, "{k}"),
            Crossover::Unbounded => f.write_str("inf"),
        }
    }
}

pub fn crossover_round(p: &PayoffParams, regime: IdentityRegime) -> Crossover {
    crossover_round_capped(p, regime, DEFAULT_ROUND_CAP)
}

/// Smallest `k` in `1..=cap` with `coop_payoff(k) >= defector_payoff(k)`.
///
/// Rounds are scanned directly. The payoff gap is affine in `k`, so when it
/// is negative at `k = 1` and does not grow, the scan is cut short.
pub fn crossover_round_capped(p: &PayoffParams, regime: IdentityRegime, cap: u64) -> Crossover {
    let gap = |k: u64| coop_payoff(p, k, regime) - defector_payoff(p, k, regime);
    let first = gap(1);
    if first >= 0.0 {
        return Crossover::Round(1);
    }
    if cap >= 2 && gap(2) <= first {
        return Crossover::Unbounded;
    }
    (2..=cap).find(|&k| gap(k) >= 0.0).map_or(Crossover::Unbounded, Crossover::Round)
}

/// Real-valued round threshold for `delta = 0`; `None` when cooperation
/// never catches up (non-positive denominator).
pub fn closed_form_threshold(p: &PayoffParams, regime: IdentityRegime) -> Option<f64> {
    let earned = p.m_prime * allocation_probability(p.mu, p.x * p.x);
    let cost = p.m * allocation_probability(p.mu, p.x);
    let newcomer = p.m_prime * allocation_probability(p.r_ini, p.x);
    let (num, den) = match regime {
        IdentityRegime::Permanent => (earned, earned - cost),
        IdentityRegime::ZeroCost => (earned - newcomer, earned - cost - newcomer),
        IdentityRegime::FiniteCost => {
            let zc = p.z / p.c;
            (earned - newcomer + zc, earned - cost - newcomer + zc)
        }
    };
    (den > 0.0).then(|| num / den)
}

/// Permanent-identity threshold with `delta = 0`, as a function of `x`.
pub fn permanent_threshold(mu: f64, x: f64, m_ratio: f64) -> Option<f64> {
    let p = PayoffParams { mu, x, m: m_ratio, m_prime: 1.0, delta: 0.0, ..PayoffParams::default() };
    closed_form_threshold(&p, IdentityRegime::Permanent)
}

/// The exponent minimising the permanent-identity threshold when
/// `m = m_prime`: the threshold is `1 / (1 - mu^(x - x^2))`, smallest where
/// `x - x^2` peaks.
pub fn optimal_x_permanent() -> f64 {
    0.5
}

/// Grid point minimising [`permanent_threshold`]; points where the
/// threshold is undefined are skipped.
pub fn argmin_permanent_threshold<I>(mu: f64, m_ratio: f64, grid: I) -> Option<f64>
where
    I: IntoIterator<Item = f64>,
{
    grid.into_iter()
        .filter_map(|x| permanent_threshold(mu, x, m_ratio).map(|k| (x, k)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(x, _)| x)
}

/// Largest initial reputation at exponent `x` for which free-identity
/// cooperation still catches up: `(mu^(x^2) - (m/m') mu^x)^(1/x)`.
pub fn feasibility_boundary(mu: f64, x: f64, m_ratio: f64) -> Option<f64> {
    let gap = mu.powf(x * x) - m_ratio * mu.powf(x);
    (gap > 0.0).then(|| gap.powf(1.0 / x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub r_star: f64,
    pub x_star: f64,
}

/// Maximises [`feasibility_boundary`] over `x` in `(0, 1]`: a dense scan
/// followed by golden-section refinement around the best grid cell.
pub fn max_feasible_r_ini(mu: f64, m_ratio: f64) -> Result<FrontierPoint, PayoffError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(PayoffError::Infeasible(format!("mu = {mu} must lie in (0, 1)")));
    }
    const STEPS: usize = 2000;
    let value = |x: f64| feasibility_boundary(mu, x, m_ratio).unwrap_or(f64::NEG_INFINITY);
    let (best_i, best_v) = (1..=STEPS)
        .map(|i| (i, value(i as f64 / STEPS as f64)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    if !best_v.is_finite() {
        return Err(PayoffError::Infeasible(format!(
            "mu^(x^2) <= {m_ratio} mu^x for every x at mu = {mu}"
        )));
    }
    let h = 1.0 / STEPS as f64;
    let mut lo = ((best_i as f64 - 1.0) * h).max(1e-9);
    let mut hi = ((best_i as f64 + 1.0) * h).min(1.0);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if value(a) < value(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let x_star = 0.5 * (lo + hi);
    let r_star = value(x_star).max(best_v);
    Ok(FrontierPoint { r_star, x_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Accumulates the two ledgers round by round from per-round cash flows.
    fn ledger(p: &PayoffParams, k: u64, regime: IdentityRegime) -> (f64, f64) {
        let serve = p.mu.powf(p.x) * p.c;
        let earned_rep = (p.m * serve) / (p.m * p.c);
        let (mut coop, mut defect) = (0.0, 0.0);
        let mut coop_rep = p.r_ini;
        for round in 1..=k {
            if round == 1 && regime == IdentityRegime::FiniteCost {
                coop -= p.z;
            }
            coop -= p.m * serve;
            coop += p.m_prime * coop_rep.powf(p.x) * p.c;
            coop += p.delta;
            coop_rep = earned_rep;

            let defector_paid = match regime {
                IdentityRegime::Permanent => round == 1,
                _ => true,
            };
            if defector_paid {
                defect += p.m_prime * p.r_ini.powf(p.x) * p.c + p.delta;
            }
            if regime == IdentityRegime::FiniteCost {
                defect -= p.z;
            }
        }
        (coop, defect)
    }

    #[test]
    fn allocation_cases() {
        assert_eq!(allocation_probability(1.0, 0.3), 1.0);
        assert_eq!(allocation_probability(0.25, 0.5), 0.5);
        assert!((allocation_probability(0.5, 0.5) - 0.707_106_781_186_547_5).abs() < 1e-15);
    }

    #[test]
    fn first_round_cooperative_payoff() {
        let p = PayoffParams { mu: 0.4, x: 0.6, c: 2.0, delta: 0.01, m: 3.0, m_prime: 2.0, r_ini: 0.2, z: 0.0 };
        let expected = -3.0 * 0.4f64.powf(0.6) * 2.0 + 2.0 * 2.0 * 0.2f64.powf(0.6) + 0.01;
        assert!((coop_payoff(&p, 1, IdentityRegime::Permanent) - expected).abs() < 1e-12);
    }

    #[test]
    fn ideal_network_is_flat() {
        let p = PayoffParams { mu: 1.0, r_ini: 1.0, delta: 0.0, ..PayoffParams::default() };
        for k in [1, 2, 10, 1000] {
            assert!(coop_payoff(&p, k, IdentityRegime::Permanent).abs() < 1e-12);
        }
    }

    #[test]
    fn ten_round_value_matches_ledger() {
        let p = PayoffParams { mu: 0.5, x: 0.5, r_ini: 0.036, delta: 0.0, ..PayoffParams::default() };
        let (coop, _) = ledger(&p, 10, IdentityRegime::ZeroCost);
        assert!((coop_payoff(&p, 10, IdentityRegime::ZeroCost) - coop).abs() < 1e-12);
        // -10 * 0.707107 + 9 * 0.840896 + 0.189737
        assert!((coop - 0.686_736_6).abs() < 1e-6, "{coop}");
    }

    #[test]
    fn defector_cases() {
        let p = PayoffParams { r_ini: 0.3, delta: 0.001, ..PayoffParams::default() };
        assert_eq!(
            defector_payoff(&p, 100, IdentityRegime::Permanent),
            defector_payoff(&p, 1, IdentityRegime::Permanent)
        );
        let two = 2.0 * 0.3f64.powf(0.5) + 2.0 * 0.001;
        assert!((defector_payoff(&p, 2, IdentityRegime::ZeroCost) - two).abs() < 1e-15);
        let priced = PayoffParams { z: 0.3f64.powf(0.5) + 0.001, ..p };
        for k in [1, 7, 50] {
            assert!(defector_payoff(&priced, k, IdentityRegime::FiniteCost).abs() < 1e-12);
        }
    }

    #[test]
    fn crossover_cases() {
        let ideal = PayoffParams { mu: 1.0, ..PayoffParams::default() };
        assert_eq!(crossover_round(&ideal, IdentityRegime::Permanent), Crossover::Unbounded);
        let ideal_no_delta = PayoffParams { delta: 0.0, ..ideal };
        assert_eq!(crossover_round(&ideal_no_delta, IdentityRegime::Permanent), Crossover::Unbounded);

        let p = PayoffParams { mu: 0.5, x: 0.5, delta: 0.0, ..PayoffParams::default() };
        assert_eq!(crossover_round(&p, IdentityRegime::Permanent), Crossover::Round(7));
        let threshold = closed_form_threshold(&p, IdentityRegime::Permanent).unwrap();
        assert!((threshold - 1.0 / (1.0 - 0.5f64.powf(0.25))).abs() < 1e-12);
        assert!((threshold - 6.285).abs() < 1e-3);

        let above = PayoffParams { r_ini: 0.05, ..p };
        assert_eq!(crossover_round(&above, IdentityRegime::ZeroCost), Crossover::Unbounded);
        assert_eq!(closed_form_threshold(&above, IdentityRegime::ZeroCost), None);
    }

    #[test]
    fn closed_form_cases() {
        let p = PayoffParams { mu: 0.3, x: 0.4, delta: 0.0, ..PayoffParams::default() };
        let expected = 0.3f64.powf(0.16) / (0.3f64.powf(0.16) - 0.3f64.powf(0.4));
        assert!((closed_form_threshold(&p, IdentityRegime::Permanent).unwrap() - expected).abs() < 1e-12);

        let z = PayoffParams { mu: 0.5, x: 0.7, r_ini: 0.02, delta: 0.0, ..PayoffParams::default() };
        let t = closed_form_threshold(&z, IdentityRegime::ZeroCost).unwrap();
        assert!(t > 0.0 && t.is_finite());
        let k = crossover_round(&z, IdentityRegime::ZeroCost).round().unwrap() as f64;
        assert!((k - t).abs() <= 1.0);

        let pricey = PayoffParams { z: 1e9, ..z };
        assert!((closed_form_threshold(&pricey, IdentityRegime::FiniteCost).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn optimal_exponent() {
        assert_eq!(optimal_x_permanent(), 0.5);
        let grid = (1..100).map(|i| i as f64 / 100.0);
        for mu in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let x = argmin_permanent_threshold(mu, 1.0, grid.clone()).unwrap();
            assert!((x - 0.5).abs() <= 0.01, "mu {mu}: {x}");
            let at = |x| permanent_threshold(mu, x, 1.0).unwrap();
            assert!(at(0.5) < at(0.3) && at(0.5) < at(0.7));
        }
        assert!((permanent_threshold(0.5, 0.5, 1.0).unwrap() - 6.29).abs() < 0.01);
    }

    #[test]
    fn frontier_cases() {
        let f = max_feasible_r_ini(0.5, 1.0).unwrap();
        assert!((f.r_star - 0.036).abs() <= 0.002, "{f:?}");
        assert!((0.65..=0.80).contains(&f.x_star), "{f:?}");

        let near_one = max_feasible_r_ini(0.999, 1.0).unwrap();
        assert!(near_one.r_star < 1e-3);

        let half = feasibility_boundary(0.5, 0.5, 1.0).unwrap();
        let expected = (0.5f64.powf(0.25) - 0.5f64.powf(0.5)).powi(2);
        assert!((half - expected).abs() < 1e-15);
        assert!((half - 0.0179).abs() < 1e-4);
        let base = PayoffParams { mu: 0.5, x: 0.5, delta: 0.0, ..PayoffParams::default() };
        let below = PayoffParams { r_ini: half * 0.99, ..base };
        let beyond = PayoffParams { r_ini: half * 1.01, ..base };
        assert!(matches!(crossover_round(&below, IdentityRegime::ZeroCost), Crossover::Round(_)));
        assert_eq!(crossover_round(&beyond, IdentityRegime::ZeroCost), Crossover::Unbounded);

        assert!(matches!(max_feasible_r_ini(0.5, 50.0), Err(PayoffError::Infeasible(_))));
    }

    #[test]
    fn validation() {
        let p = PayoffParams::default();
        assert!(p.validate(IdentityRegime::ZeroCost).is_ok());
        assert!(p.validate(IdentityRegime::FiniteCost).is_err());
        let bad = PayoffParams { x: 1.5, mu: 0.0, ..p };
        let err = bad.validate(IdentityRegime::Permanent).unwrap_err().to_string();
        assert!(err.contains("mu") && err.contains("x ="));
    }

    #[test]
    fn superlinear_exponent_keeps_cooperators_negative() {
        for mu in [0.2, 0.5, 0.8] {
            for x in [1.2, 1.5, 2.0] {
                for r_frac in [0.1, 0.5, 0.9] {
                    let p = PayoffParams { mu, x, r_ini: mu * r_frac, delta: 0.0, ..PayoffParams::default() };
                    for k in [1, 2, 5, 50, 500] {
                        assert!(coop_payoff(&p, k, IdentityRegime::Permanent) < 0.0);
                    }
                }
            }
        }
    }

    fn params() -> impl Strategy<Value = PayoffParams> {
        (0.05f64..1.0, 0.05f64..1.0, 0.1f64..5.0, 0.0f64..0.01, 0.01f64..2.0, 0.2f64..3.0, 0.2f64..3.0, 0.0f64..1.0)
            .prop_map(|(mu, x, c, delta, z, m, m_prime, r_ini)| PayoffParams { mu, x, c, delta, z, m, m_prime, r_ini })
    }

    proptest! {
        #[test]
        fn payoffs_match_ledger(p in params(), k in 1u64..=100) {
            for regime in IdentityRegime::ALL {
                let (coop, defect) = ledger(&p, k, regime);
                let scale = 1.0 + coop.abs().max(defect.abs());
                prop_assert!((coop_payoff(&p, k, regime) - coop).abs() <= 1e-12 * scale);
                prop_assert!((defector_payoff(&p, k, regime) - defect).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn zero_cost_crossover_monotone_in_r_ini(p in params(), a in 0.0f64..0.05, b in 0.0f64..0.05) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let at = |r| crossover_round_capped(&PayoffParams { r_ini: r, ..p }, IdentityRegime::ZeroCost, 10_000)
                .round().unwrap_or(u64::MAX);
            prop_assert!(at(lo) <= at(hi));
        }

        #[test]
        fn finite_cost_crossover_monotone_in_price(p in params(), a in 0.01f64..3.0, b in 0.01f64..3.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let at = |z| crossover_round_capped(&PayoffParams { z, ..p }, IdentityRegime::FiniteCost, 10_000)
                .round().unwrap_or(u64::MAX);
            prop_assert!(at(hi) <= at(lo));
        }
    }
}
