//! Strategic timing of whitewashing among `kappa` independent players
//! who share one estimation window.
//!
//! Players that rejoin in the same round inflate the observed whitewash
//! level together, so the offer each of them receives shrinks with the
//! number of co-arrivals. Players differ only in the lowest offer they will
//! accept.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("invalid game: {0}")]
    InvalidSpec(String),
    #[error("indifference residual {residual:e} exceeds tolerance")]
    NoSolution { residual: f64 },
    #[error("offer curve and level never intersect in [0, {w_max}]")]
    NoRoot { w_max: f64 },
    #[error("enumeration of {rounds}^{kappa} assignments is too large")]
    TooLarge { kappa: usize, rounds: usize },
}

/// Largest player count the enumerators accept.
pub const MAX_PLAYERS: usize = 12;
/// Largest joint assignment count [`expected_payoffs`] will enumerate.
pub const MAX_ASSIGNMENTS: u64 = 50_000_000;
/// Tolerance on the indifference residual of an accepted equilibrium.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub kappa: usize,
    pub rounds: usize,
    pub r_ini_max: f64,
    pub r_ini_min: f64,
    /// Lowest acceptable offer per player, highest first.
    pub honesty: Vec<f64>,
}

impl GameSpec {
    /// Players whose thresholds sit exactly on the offer schedule: player
    /// `j` accepts an offer made to at most `j + 1` co-arrivals.
    pub fn ladder(kappa: usize, rounds: usize, r_ini_max: f64, r_ini_min: f64) -> Self {
        GameSpec {
            kappa,
            rounds,
            r_ini_max,
            r_ini_min,
            honesty: reputation_schedule(kappa, r_ini_max, r_ini_min),
        }
    }

    pub fn with_rounds(&self, rounds: usize) -> Self {
        GameSpec { rounds, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let mut problems = Vec::new();
        if self.kappa == 0 || self.kappa > MAX_PLAYERS {
            problems.push(format!("kappa = {} not in 1..={MAX_PLAYERS}", self.kappa));
        }
        if self.rounds == 0 {
            problems.push("rounds must be at least 1".to_string());
        }
        if self.honesty.len() != self.kappa {
            problems.push(format!("{} honesty levels for {} players", self.honesty.len(), self.kappa));
        }
        if !(0.0 <= self.r_ini_min && self.r_ini_min < self.r_ini_max && self.r_ini_max <= 1.0) {
            problems.push(format!(
                "need 0 <= r_ini_min < r_ini_max <= 1, got {} and {}",
                self.r_ini_min, self.r_ini_max
            ));
        }
        if self.honesty.windows(2).any(|w| w[0] < w[1]) {
            problems.push("honesty levels must be non-increasing".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GameError::InvalidSpec(problems.join("; ")))
        }
    }

    fn offer(&self, co_arrivals: usize) -> f64 {
        schedule_value(co_arrivals, self.kappa, self.r_ini_max, self.r_ini_min)
    }

    fn realized(&self, player: usize, co_arrivals: usize) -> f64 {
        let offer = self.offer(co_arrivals);
        if offer >= self.honesty[player] {
            offer
        } else {
            0.0
        }
    }
}

/// Offer made when `w` of `kappa` players arrive together.
fn schedule_value(w: usize, kappa: usize, r_ini_max: f64, r_ini_min: f64) -> f64 {
    if w >= kappa {
        return r_ini_min;
    }
    let frac = w as f64 / kappa as f64;
    ((1.0 - frac).powi(2) * r_ini_max).max(r_ini_min)
}

/// Offers for `1..=kappa` simultaneous arrivals.
pub fn reputation_schedule(kappa: usize, r_ini_max: f64, r_ini_min: f64) -> Vec<f64> {
    (1..=kappa).map(|w| schedule_value(w, kappa, r_ini_max, r_ini_min)).collect()
}

/// Row `j` gives player `j`'s probability of whitewashing in each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub probs: Vec<Vec<f64>>,
}

impl MixedProfile {
    pub fn uniform(kappa: usize, rounds: usize) -> Self {
        MixedProfile { probs: vec![vec![1.0 / rounds as f64; rounds]; kappa] }
    }

    pub fn validate(&self, kappa: usize, rounds: usize) -> Result<(), GameError> {
        if self.probs.len() != kappa || self.probs.iter().any(|r| r.len() != rounds) {
            return Err(GameError::InvalidSpec(format!("profile is not {kappa} x {rounds}")));
        }
        for (j, row) in self.probs.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(GameError::InvalidSpec(format!("row {j} has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(GameError::InvalidSpec(format!("row {j} sums to {sum}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureOutcome {
    /// `true` where the player whitewashes.
    pub actions: Vec<bool>,
    pub payoffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub kappa: usize,
    pub table: Vec<PureOutcome>,
    pub whitewash_weakly_dominant: bool,
    /// Payoff of each player when everybody whitewashes.
    pub all_whitewash_payoffs: Vec<f64>,
    /// The same profile once players refuse offers below their threshold.
    pub collapsed_payoffs: Vec<f64>,
}

/// Simultaneous one-shot game: every player either whitewashes now or
/// abstains; whitewashers share the offer for their head count.
pub fn pure_strategy_analysis(spec: &GameSpec) -> Result<DominanceReport, GameError> {
    spec.validate()?;
    if spec.kappa < 2 {
        return Err(GameError::InvalidSpec("pure analysis needs at least two players".into()));
    }
    let k = spec.kappa;
    let payoff = |actions: &[bool], j: usize| {
        if actions[j] {
            spec.offer(actions.iter().filter(|&&a| a).count())
        } else {
            0.0
        }
    };
    let table: Vec<PureOutcome> = (0..1u32 << k)
        .map(|mask| {
            // most significant bit is the first player, so all-abstain comes first
            let actions: Vec<bool> = (0..k).map(|j| mask >> (k - 1 - j) & 1 == 1).collect();
            let payoffs = (0..k).map(|j| payoff(&actions, j)).collect();
            PureOutcome { actions, payoffs }
        })
        .collect();

    let mut dominant = true;
    for j in 0..k {
        let mut strict_somewhere = false;
        for row in table.iter().filter(|r| r.actions[j]) {
            let mut alt = row.actions.clone();
            alt[j] = false;
            let abstain = payoff(&alt, j);
            if row.payoffs[j] < abstain {
                dominant = false;
            }
            if row.payoffs[j] > abstain {
                strict_somewhere = true;
            }
        }
        dominant &= strict_somewhere;
    }
    let everyone = vec![true; k];
    let all_whitewash_payoffs: Vec<f64> = (0..k).map(|j| payoff(&everyone, j)).collect();
    let collapsed_payoffs = (0..k).map(|j| spec.realized(j, k)).collect();
    Ok(DominanceReport {
        kappa: k,
        table,
        whitewash_weakly_dominant: dominant,
        all_whitewash_payoffs,
        collapsed_payoffs,
    })
}

/// Distribution of how many of the other players pick `round`.
fn co_arrival_distribution(profile: &MixedProfile, player: usize, round: usize) -> Vec<f64> {
    let mut dist = vec![1.0];
    for (k, row) in profile.probs.iter().enumerate() {
        if k == player {
            continue;
        }
        let p = row[round];
        let mut next = vec![0.0; dist.len() + 1];
        for (c, &mass) in dist.iter().enumerate() {
            next[c] += mass * (1.0 - p);
            next[c + 1] += mass * p;
        }
        dist = next;
    }
    dist
}

/// Expected payoff of `player` if it whitewashes in `round` for sure while
/// the others follow `profile`.
pub fn round_payoff(spec: &GameSpec, profile: &MixedProfile, player: usize, round: usize) -> f64 {
    co_arrival_distribution(profile, player, round)
        .iter()
        .enumerate()
        .map(|(others, mass)| mass * spec.realized(player, others + 1))
        .sum()
}

/// Largest deviation of any player's per-round payoff from its mean over
/// the rounds it plays with positive probability.
pub fn indifference_residual(spec: &GameSpec, profile: &MixedProfile) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..spec.kappa {
        let support: Vec<usize> = (0..spec.rounds).filter(|&i| profile.probs[j][i] > 0.0).collect();
        let values: Vec<f64> = support.iter().map(|&i| round_payoff(spec, profile, j, i)).collect();
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        for v in values {
            worst = worst.max((v - mean).abs());
        }
        let row_sum: f64 = profile.probs[j].iter().sum();
        worst = worst.max((row_sum - 1.0).abs());
    }
    worst
}

/// The uniform randomisation, verified against every player's
/// indifference condition.
pub fn mixed_equilibrium(spec: &GameSpec) -> Result<MixedProfile, GameError> {
    spec.validate()?;
    if spec.rounds < 2 {
        return Err(GameError::InvalidSpec("randomising needs at least two rounds".into()));
    }
    let profile = MixedProfile::uniform(spec.kappa, spec.rounds);
    let residual = indifference_residual(spec, &profile);
    if residual < RESIDUAL_TOLERANCE {
        Ok(profile)
    } else {
        Err(GameError::NoSolution { residual })
    }
}

/// Exact expected payoffs by enumerating every joint round assignment.
pub fn expected_payoffs(spec: &GameSpec, profile: &MixedProfile) -> Result<Vec<f64>, GameError> {
    spec.validate()?;
    profile.validate(spec.kappa, spec.rounds)?;
    let (k, r) = (spec.kappa, spec.rounds);
    let total = (r as u64).checked_pow(k as u32).filter(|&t| t <= MAX_ASSIGNMENTS);
    let Some(total) = total else {
        return Err(GameError::TooLarge { kappa: k, rounds: r });
    };
    let mut payoffs = vec![0.0; k];
    let mut assignment = vec![0usize; k];
    let mut counts = vec![0usize; r];
    for code in 0..total {
        let mut rest = code;
        counts.iter_mut().for_each(|c| *c = 0);
        let mut weight = 1.0;
        for (slot, probs) in assignment.iter_mut().zip(&profile.probs) {
            let round = (rest % r as u64) as usize;
            rest /= r as u64;
            *slot = round;
            counts[round] += 1;
            weight *= probs[round];
        }
        if weight == 0.0 {
            continue;
        }
        for (j, (payoff, &round)) in payoffs.iter_mut().zip(&assignment).enumerate() {
            *payoff += weight * spec.realized(j, counts[round]);
        }
    }
    Ok(payoffs)
}

/// Expected payoffs through the per-round co-arrival distribution; agrees
/// with [`expected_payoffs`] but scales to any size.
pub fn expected_payoffs_dp(spec: &GameSpec, profile: &MixedProfile) -> Result<Vec<f64>, GameError> {
    spec.validate()?;
    profile.validate(spec.kappa, spec.rounds)?;
    Ok((0..spec.kappa)
        .map(|j| {
            (0..spec.rounds)
                .map(|i| profile.probs[j][i] * round_payoff(spec, profile, j, i))
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanReport {
    /// `(rounds, per-player payoff)` under uniform randomisation.
    pub payoffs_by_span: Vec<(usize, Vec<f64>)>,
    /// Span maximising each player's payoff.
    pub best_span: Vec<usize>,
    /// Whether spreading over all `kappa` rounds is at least as good as any
    /// shorter span for every player.
    pub full_span_dominates: bool,
    /// Payoff of whitewashing in every round of the full span while the
    /// others randomise uniformly.
    pub deviation_payoffs: Vec<f64>,
}

/// Compares uniform randomisation over `2..=kappa` rounds.
pub fn best_randomization_span(spec: &GameSpec) -> Result<SpanReport, GameError> {
    spec.validate()?;
    if spec.kappa < 2 {
        return Err(GameError::InvalidSpec("span comparison needs at least two players".into()));
    }
    let mut payoffs_by_span = Vec::new();
    for rounds in 2..=spec.kappa {
        let s = spec.with_rounds(rounds);
        let profile = MixedProfile::uniform(s.kappa, rounds);
        payoffs_by_span.push((rounds, expected_payoffs_dp(&s, &profile)?));
    }
    let best_span = (0..spec.kappa)
        .map(|j| {
            payoffs_by_span
                .iter()
                .fold((0usize, f64::NEG_INFINITY), |best, (span, v)| {
                    if v[j] > best.1 + 1e-15 {
                        (*span, v[j])
                    } else {
                        best
                    }
                })
                .0
        })
        .collect();
    let full = &payoffs_by_span.last().expect("kappa >= 2").1;
    let full_span_dominates = payoffs_by_span
        .iter()
        .all(|(_, v)| v.iter().zip(full).all(|(short, long)| *long >= *short - 1e-15));
    let full_spec = spec.with_rounds(spec.kappa);
    let uniform = MixedProfile::uniform(spec.kappa, spec.kappa);
    let deviation_payoffs = (0..spec.kappa)
        .map(|j| (0..spec.kappa).map(|i| round_payoff(&full_spec, &uniform, j, i)).sum())
        .collect();
    Ok(SpanReport { payoffs_by_span, best_span, full_span_dominates, deviation_payoffs })
}

/// Stable operating point of the adaptive policy: the level `W` at which
/// the offer it triggers, `max(r_ini_min, (1 - W / w_max)^2 r_ini_max)`,
/// recruits exactly a fraction `W` of uniformly honest peers.
pub fn fixed_point(r_ini_max: f64, r_ini_min: f64, w_max: f64) -> Result<f64, GameError> {
    if !(w_max > 0.0 && w_max <= 1.0) {
        return Err(GameError::InvalidSpec(format!("w_max = {w_max} not in (0, 1]")));
    }
    let offer = |w: f64| ((1.0 - w / w_max).powi(2) * r_ini_max).max(r_ini_min);
    let gap = |w: f64| w - offer(w);
    if gap(w_max) < 0.0 {
        return Err(GameError::NoRoot { w_max });
    }
    let (mut lo, mut hi) = (0.0, w_max);
    if gap(lo) >= 0.0 {
        return Ok(lo);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const R_MAX: f64 = 0.5;
    const R_MIN: f64 = 0.03;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn schedule_cases() {
        let s3 = reputation_schedule(3, R_MAX, R_MIN);
        assert!(close(s3[0], 4.0 / 9.0 * R_MAX) && close(s3[1], R_MAX / 9.0) && s3[2] == R_MIN);
        let s2 = reputation_schedule(2, R_MAX, R_MIN);
        assert!(close(s2[0], R_MAX / 4.0) && s2[1] == R_MIN);
        assert_eq!(reputation_schedule(1, R_MAX, R_MIN), vec![R_MIN]);
        for k in 2..=8 {
            let s = reputation_schedule(k, R_MAX, 0.0);
            assert!(s.windows(2).all(|w| w[0] > w[1] || w[1] == 0.0));
        }
    }

    #[test]
    fn two_player_table() {
        let spec = GameSpec::ladder(2, 2, R_MAX, R_MIN);
        let rep = pure_strategy_analysis(&spec).unwrap();
        let row = |a: bool, b: bool| {
            rep.table.iter().find(|r| r.actions == [a, b]).unwrap().payoffs.clone()
        };
        assert_eq!(row(true, true), vec![R_MIN, R_MIN]);
        assert_eq!(row(true, false), vec![R_MAX / 4.0, 0.0]);
        assert_eq!(row(false, true), vec![0.0, R_MAX / 4.0]);
        assert_eq!(row(false, false), vec![0.0, 0.0]);
        assert!(rep.whitewash_weakly_dominant);
        assert_eq!(rep.all_whitewash_payoffs, vec![R_MIN, R_MIN]);
        assert_eq!(rep.collapsed_payoffs[0], 0.0);

        let free = GameSpec::ladder(2, 2, R_MAX, 0.0);
        let rep = pure_strategy_analysis(&free).unwrap();
        assert_eq!(rep.all_whitewash_payoffs, vec![0.0, 0.0]);
        assert!(rep.whitewash_weakly_dominant);
    }

    #[test]
    fn three_player_enumeration() {
        let spec = GameSpec::ladder(3, 3, R_MAX, R_MIN);
        let rep = pure_strategy_analysis(&spec).unwrap();
        assert_eq!(rep.table.len(), 8);
        for row in &rep.table {
            let count = row.actions.iter().filter(|&&a| a).count();
            for (j, &u) in row.payoffs.iter().enumerate() {
                let expected = if row.actions[j] {
                    ((1.0 - count as f64 / 3.0).powi(2) * R_MAX).max(R_MIN)
                } else {
                    0.0
                };
                assert!(close(u, expected));
            }
        }
        assert_eq!(rep.all_whitewash_payoffs, vec![R_MIN; 3]);
    }

    #[test]
    fn uniform_equilibria() {
        for k in 2..=4 {
            let spec = GameSpec::ladder(k, k, R_MAX, R_MIN);
            let p = mixed_equilibrium(&spec).unwrap();
            assert!(p.probs.iter().flatten().all(|&v| close(v, 1.0 / k as f64)));
            assert!(indifference_residual(&spec, &p) < 1e-9);
        }
        let lopsided = MixedProfile { probs: vec![vec![0.9, 0.1], vec![0.5, 0.5]] };
        let spec = GameSpec::ladder(2, 2, R_MAX, R_MIN);
        assert!(indifference_residual(&spec, &lopsided) > 1e-3);
        assert!(matches!(mixed_equilibrium(&spec.with_rounds(1)), Err(GameError::InvalidSpec(_))));
    }

    #[test]
    fn enumerated_payoffs() {
        let spec = GameSpec::ladder(3, 3, R_MAX, R_MIN);
        let u = expected_payoffs(&spec, &MixedProfile::uniform(3, 3)).unwrap();
        assert!(close(u[0], 16.0 / 81.0 * R_MAX));
        assert!(close(u[1], 20.0 / 81.0 * R_MAX));
        assert!(close(u[2], 20.0 / 81.0 * R_MAX + R_MIN / 9.0));

        let two = spec.with_rounds(2);
        let u = expected_payoffs(&two, &MixedProfile::uniform(3, 2)).unwrap();
        assert!(close(u[0], 4.0 / 36.0 * R_MAX));
        assert!(close(u[1], 6.0 / 36.0 * R_MAX));
        assert!(close(u[2], 6.0 / 36.0 * R_MAX + R_MIN / 4.0));
    }

    #[test]
    fn dp_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 2..=5 {
            for r in 2..=5 {
                let spec = GameSpec::ladder(k, r, R_MAX, R_MIN);
                let probs = (0..k)
                    .map(|_| {
                        let raw: Vec<f64> = (0..r).map(|_| rng.gen::<f64>() + 0.01).collect();
                        let s: f64 = raw.iter().sum();
                        raw.into_iter().map(|v| v / s).collect()
                    })
                    .collect();
                let profile = MixedProfile { probs };
                let a = expected_payoffs(&spec, &profile).unwrap();
                let b = expected_payoffs_dp(&spec, &profile).unwrap();
                assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn equal_thresholds_are_symmetric() {
        let spec = GameSpec { kappa: 4, rounds: 3, r_ini_max: R_MAX, r_ini_min: R_MIN, honesty: vec![0.1; 4] };
        let u = expected_payoffs(&spec, &MixedProfile::uniform(4, 3)).unwrap();
        assert!(u.windows(2).all(|w| close(w[0], w[1])));
    }

    #[test]
    fn enumeration_matches_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (k, r) in [(2, 2), (3, 2), (3, 3), (4, 3), (5, 5)] {
            let spec = GameSpec::ladder(k, r, R_MAX, R_MIN);
            let exact = expected_payoffs(&spec, &MixedProfile::uniform(k, r)).unwrap();
            let draws = 1_000_000;
            let mut sum = vec![0.0; k];
            let mut sq = vec![0.0; k];
            let mut rounds = vec![0usize; k];
            let mut counts = vec![0usize; r];
            for _ in 0..draws {
                counts.iter_mut().for_each(|c| *c = 0);
                for slot in rounds.iter_mut() {
                    *slot = rng.gen_range(0..r);
                    counts[*slot] += 1;
                }
                for j in 0..k {
                    let v = spec.realized(j, counts[rounds[j]]);
                    sum[j] += v;
                    sq[j] += v * v;
                }
            }
            for j in 0..k {
                let mean = sum[j] / draws as f64;
                let var = sq[j] / draws as f64 - mean * mean;
                let se = (var / draws as f64).sqrt().max(1e-12);
                assert!((mean - exact[j]).abs() <= 3.0 * se, "k={k} r={r} j={j}: {mean} vs {}", exact[j]);
            }
        }
    }

    #[test]
    fn spreading_pays() {
        let rep3 = best_randomization_span(&GameSpec::ladder(3, 3, R_MAX, R_MIN)).unwrap();
        assert!(rep3.full_span_dominates);
        assert_eq!(rep3.best_span[..2], [3, 3]);
        let (three, two) = (&rep3.payoffs_by_span[1].1, &rep3.payoffs_by_span[0].1);
        assert!(three[0] > two[0] && three[1] > two[1]);
        for (dev, uniform) in rep3.deviation_payoffs.iter().zip(three) {
            assert!(dev > uniform);
        }

        let rep2 = best_randomization_span(&GameSpec::ladder(2, 2, R_MAX, R_MIN)).unwrap();
        assert_eq!(rep2.best_span, vec![2, 2]);

        let rep4 = best_randomization_span(&GameSpec::ladder(4, 4, R_MAX, R_MIN)).unwrap();
        assert_eq!(rep4.best_span[0], 4);
        let top: Vec<f64> = rep4.payoffs_by_span.iter().map(|(_, v)| v[0]).collect();
        assert!(top[2] > top[1] && top[2] > top[0]);
    }

    #[test]
    fn fixed_point_cases() {
        let w = fixed_point(0.5, 0.03, 0.5).unwrap();
        assert!((w - (3.0 - 5f64.sqrt()) / 4.0).abs() < 1e-9);
        assert_eq!(fixed_point(0.0, 0.03, 0.5).map(|w| (w - 0.03).abs() < 1e-9), Ok(true));
        assert_eq!(fixed_point(0.5, 0.2, 0.1), Err(GameError::NoRoot { w_max: 0.1 }));
        assert!(matches!(fixed_point(0.5, 0.03, 0.0), Err(GameError::InvalidSpec(_))));

        let mut prev = f64::INFINITY;
        for i in (1..=10).rev() {
            let w_max = i as f64 / 10.0;
            let w = fixed_point(0.5, 0.03, w_max).unwrap();
            let f = ((1.0 - w / w_max).powi(2) * 0.5).max(0.03);
            assert!((f - w).abs() < 1e-8);
            assert!(w <= prev);
            prev = w;
        }
    }
}
