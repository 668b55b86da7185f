//! Network-wide aggregates every peer is assumed to learn by gossip.
//!
//! Aggregation itself is idealised: a snapshot reads the true values off
//! the topology and optionally perturbs them with independent uniform
//! multiplicative noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::Population;
use crate::graph::Topology;

/// Gossip rounds a newcomer must have seen before its reputation is used.
pub const NEWCOMER_MIN_AGE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GossipSnapshot {
    pub iteration: u64,
    pub node_count: f64,
    pub degree_sum: f64,
    /// Mean reputation of recent newcomers, if there are any.
    pub newcomer_mean_reputation: Option<f64>,
    pub node_count_factor: f64,
    pub degree_sum_factor: f64,
}

/// Draws a snapshot at iteration `iteration`.
///
/// Newcomers are peers that joined after the start, at least
/// [`NEWCOMER_MIN_AGE`] iterations ago and no more than `newcomer_horizon`
/// iterations ago. With `noise == 0` no randomness is consumed.
pub fn take_snapshot<R: Rng + ?Sized>(
    topology: &Topology,
    agents: &Population,
    iteration: u64,
    noise: f64,
    newcomer_horizon: u64,
    rng: &mut R,
) -> GossipSnapshot {
    let (node_count_factor, degree_sum_factor) = if noise > 0.0 {
        (rng.gen_range(1.0 - noise..=1.0 + noise), rng.gen_range(1.0 - noise..=1.0 + noise))
    } else {
        (1.0, 1.0)
    };
    let newest = iteration.saturating_sub(NEWCOMER_MIN_AGE);
    let oldest = iteration.saturating_sub(newcomer_horizon).max(1);
    let (sum, count) = agents
        .iter()
        .filter(|a| a.joined_at >= oldest && a.joined_at <= newest)
        .fold((0.0, 0usize), |(s, c), a| (s + a.reputation, c + 1));
    GossipSnapshot {
        iteration,
        node_count: topology.node_count() as f64 * node_count_factor,
        degree_sum: topology.degree_sum() as f64 * degree_sum_factor,
        newcomer_mean_reputation: (count > 0).then(|| sum / count as f64),
        node_count_factor,
        degree_sum_factor,
    }
}

pub fn snapshot_average_degree(s: &GossipSnapshot) -> f64 {
    s.degree_sum / s.node_count
}

/// Keeps the latest two snapshots and fills the gaps between gossip rounds
/// by linear extrapolation of the network size.
#[derive(Debug, Clone)]
pub struct GossipTracker {
    period: u64,
    previous: Option<GossipSnapshot>,
    latest: Option<GossipSnapshot>,
}

impl GossipTracker {
    pub fn new(period: u64) -> Self {
        GossipTracker { period: period.max(1), previous: None, latest: None }
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    /// Whether a gossip round completes at this iteration (iterations are
    /// numbered from 1).
    pub fn is_gossip_round(&self, iteration: u64) -> bool {
        iteration.saturating_sub(1).is_multiple_of(self.period)
    }

    /// Stores a snapshot.
    ///
    /// # Panics
    /// If snapshots are not recorded in strictly increasing iteration order.
    pub fn record(&mut self, snapshot: GossipSnapshot) {
        if let Some(last) = &self.latest {
            assert!(
                snapshot.iteration > last.iteration,
                "gossip snapshot {} recorded after {}",
                snapshot.iteration,
                last.iteration
            );
        }
        self.previous = self.latest.replace(snapshot);
    }

    pub fn latest(&self) -> Option<&GossipSnapshot> {
        self.latest.as_ref()
    }

    /// Estimated network size at `iteration`.
    pub fn node_count_at(&self, iteration: u64) -> Option<f64> {
        let latest = self.latest.as_ref()?;
        match &self.previous {
            Some(prev) if iteration != latest.iteration => {
                let slope = (latest.node_count - prev.node_count)
                    / (latest.iteration - prev.iteration) as f64;
                let est = latest.node_count + slope * (iteration as f64 - latest.iteration as f64);
                Some(est.max(1.0))
            }
            _ => Some(latest.node_count),
        }
    }

    pub fn average_degree(&self) -> Option<f64> {
        self.latest.as_ref().map(snapshot_average_degree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentState;
    use crate::graph::NodeId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn regular(n: usize) -> (Topology, Population) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = Topology::generate_regular(n, 6, &mut rng).unwrap();
        let pop = Population::generate(t.node_ids(), 0.5, &mut rng);
        (t, pop)
    }

    #[test]
    fn exact_mode_reads_the_topology() {
        let (t, pop) = regular(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = take_snapshot(&t, &pop, 5, 0.0, 10, &mut rng);
        assert_eq!(s.node_count, 1000.0);
        assert_eq!(s.degree_sum, 6000.0);
        assert_eq!(snapshot_average_degree(&s), 6.0);
        assert_eq!(s.degree_sum as u64 % 2, 0);
    }

    #[test]
    fn no_recent_newcomers_means_no_mean() {
        let (t, mut pop) = regular(100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(take_snapshot(&t, &pop, 10, 0.0, 10, &mut rng).newcomer_mean_reputation, None);
        // joined two iterations ago: too young
        let mut young = AgentState::new(NodeId(0), 0.9, 0.5, 8, 0.6);
        young.reputation = 0.6;
        pop.insert(young);
        assert_eq!(take_snapshot(&t, &pop, 10, 0.0, 10, &mut rng).newcomer_mean_reputation, None);
        let s = take_snapshot(&t, &pop, 11, 0.0, 10, &mut rng);
        assert_eq!(s.newcomer_mean_reputation, Some(0.6));
    }

    #[test]
    fn noisy_counts_stay_in_band() {
        let (t, pop) = regular(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..1000 {
            let s = take_snapshot(&t, &pop, i + 1, 0.05, 10, &mut rng);
            assert!((950.0..=1050.0).contains(&s.node_count));
            assert!((5700.0..=6300.0).contains(&s.degree_sum));
        }
    }

    #[test]
    fn average_degree_arithmetic() {
        let mk = |n: f64, d: f64| GossipSnapshot {
            iteration: 1,
            node_count: n,
            degree_sum: d,
            newcomer_mean_reputation: None,
            node_count_factor: 1.0,
            degree_sum_factor: 1.0,
        };
        assert_eq!(snapshot_average_degree(&mk(1000.0, 6000.0)), 6.0);
        assert_eq!(snapshot_average_degree(&mk(1020.0, 6120.0)), 6.0);
        assert!((snapshot_average_degree(&mk(1000.0, 5986.0)) - 5.986).abs() < 1e-12);
    }

    #[test]
    fn tracker_interpolates_between_rounds() {
        let mk = |it: u64, n: f64| GossipSnapshot {
            iteration: it,
            node_count: n,
            degree_sum: 6.0 * n,
            newcomer_mean_reputation: None,
            node_count_factor: 1.0,
            degree_sum_factor: 1.0,
        };
        let mut tr = GossipTracker::new(5);
        assert!(tr.is_gossip_round(1) && tr.is_gossip_round(6) && !tr.is_gossip_round(3));
        tr.record(mk(1, 1000.0));
        assert_eq!(tr.node_count_at(3), Some(1000.0));
        tr.record(mk(6, 1050.0));
        assert_eq!(tr.node_count_at(6), Some(1050.0));
        assert_eq!(tr.node_count_at(8), Some(1070.0));
    }

    #[test]
    #[should_panic(expected = "recorded after")]
    fn tracker_rejects_out_of_order_snapshots() {
        let (t, pop) = regular(50);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tr = GossipTracker::new(1);
        tr.record(take_snapshot(&t, &pop, 4, 0.0, 10, &mut rng));
        tr.record(take_snapshot(&t, &pop, 4, 0.0, 10, &mut rng));
    }
}
