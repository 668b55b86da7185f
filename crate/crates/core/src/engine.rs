//! Discrete-time simulation binding topology, gossip, agents and
//! estimators.
//!
//! One iteration runs these phases in order:
//!
//! 1. Every potential whitewasher decides whether it will try to whitewash
//!    this iteration; those that will free-ride, everyone else serves.
//! 2. Gossip refreshes the network aggregates; every peer estimates its
//!    whitewash level and refreshes its offer. Neighbourhood counters reset.
//! 3. Mean reputation is taken for the next round of service and the offers
//!    are frozen for this iteration's joiners.
//! 4. Whitewash attempts against uniformly chosen peers. Successful
//!    attempters leave and rejoin under fresh ids; legitimate churn follows.
//! 5. Scheduled growth every tenth iteration.
//! 6. Metrics.
//!
//! All randomness comes from one ChaCha8 stream consumed in this order:
//! attempt draws in id order, gossip noise, attempt targets in id order,
//! rejoin attachment, departure draws in id order, growth attachment, and
//! newcomer honesty in id order. Draws that a configuration makes
//! pointless (zero noise, zero departure probability) are skipped.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentError, AgentState, Population, Role, WhitewashDecision};
use crate::estimator::{
    classify_departure, estimate_r_ini_max, local_growth_rate, whitewash_level, DepartureClass,
    EstimatorError, EstimatorState, NeighborhoodObservation,
};
use crate::gossip::{take_snapshot, GossipTracker};
use crate::graph::{GraphError, NodeId, Topology, TopologyKind};

/// Iterations between growth events.
pub const GROWTH_INTERVAL: u64 = 10;
/// Resource asked of every peer per round.
const REQUEST: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid simulation config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub n: usize,
    /// Degree of a regular topology; ignored for scale-free ones.
    pub degree: usize,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig { kind: TopologyKind::ScaleFree, n: 1000, degree: 6 }
    }
}

/// How a successful whitewasher re-enters the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejoinMode {
    /// Attaches like any newcomer, by preferential attachment.
    Preferential,
    /// Reconnects to its surviving former neighbours.
    SameNeighbors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub topology: TopologyConfig,
    /// Network growth per growth event, in percent of the current size.
    pub growth_percent_per_10: f64,
    pub iterations: u64,
    pub r_ini_max0: f64,
    pub r_ini_min: f64,
    pub window_n_prime: usize,
    pub x: f64,
    pub gossip_noise: f64,
    pub gossip_period: u64,
    /// Oldest join age still counted as a newcomer by gossip.
    pub newcomer_horizon: u64,
    /// Per-iteration chance that a well-reputed peer leaves for good.
    pub departure_probability: f64,
    pub attach_edges: usize,
    pub rejoin: RejoinMode,
    /// Track the largest offer from newcomer reputations instead of
    /// holding `r_ini_max0`.
    pub adaptive_r_ini_max: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            topology: TopologyConfig::default(),
            growth_percent_per_10: 0.0,
            iterations: 500,
            r_ini_max0: 0.5,
            r_ini_min: 0.03,
            window_n_prime: 10,
            x: 0.5,
            gossip_noise: 0.0,
            gossip_period: 1,
            newcomer_horizon: 10,
            departure_probability: 0.0,
            attach_edges: 3,
            rejoin: RejoinMode::Preferential,
            adaptive_r_ini_max: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let t = &self.topology;
        if t.n < 2 {
            v.push(format!("topology.n = {} must be at least 2", t.n));
        }
        match t.kind {
            TopologyKind::Regular => {
                if t.degree == 0 || t.degree >= t.n {
                    v.push(format!("topology.degree = {} must lie in 1..{}", t.degree, t.n));
                }
                if (t.n * t.degree) % 2 == 1 {
                    v.push(format!("topology.n * topology.degree = {} must be even", t.n * t.degree));
                }
            }
            TopologyKind::ScaleFree => {
                if t.n < self.attach_edges {
                    v.push(format!("topology.n = {} is below attach_edges = {}", t.n, self.attach_edges));
                }
            }
        }
        if self.attach_edges == 0 {
            v.push("attach_edges must be at least 1".into());
        }
        if !(self.growth_percent_per_10 >= 0.0 && self.growth_percent_per_10.is_finite()) {
            v.push(format!("growth_percent_per_10 = {} must be finite and >= 0", self.growth_percent_per_10));
        }
        if !(0.0 <= self.r_ini_min && self.r_ini_min < self.r_ini_max0 && self.r_ini_max0 <= 1.0)
            && !(self.r_ini_max0 == 0.0 && self.r_ini_min == 0.0)
        {
            v.push(format!(
                "need 0 <= r_ini_min < r_ini_max0 <= 1, got r_ini_min = {} and r_ini_max0 = {}",
                self.r_ini_min, self.r_ini_max0
            ));
        }
        if self.window_n_prime == 0 {
            v.push("window_n_prime must be at least 1".into());
        }
        if !(self.x > 0.0 && self.x <= 1.0) {
            v.push(format!("x = {} must lie in (0, 1]", self.x));
        }
        if !(0.0..1.0).contains(&self.gossip_noise) {
            v.push(format!("gossip_noise = {} must lie in [0, 1)", self.gossip_noise));
        }
        if self.gossip_period == 0 {
            v.push("gossip_period must be at least 1".into());
        }
        if self.newcomer_horizon < crate::gossip::NEWCOMER_MIN_AGE {
            v.push(format!(
                "newcomer_horizon = {} must be at least {}",
                self.newcomer_horizon,
                crate::gossip::NEWCOMER_MIN_AGE
            ));
        }
        if !(0.0..=1.0).contains(&self.departure_probability) {
            v.push(format!("departure_probability = {} must lie in [0, 1]", self.departure_probability));
        }
        v
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(EngineError::InvalidConfig(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub n_nodes: usize,
    pub whitewash_attempts: usize,
    pub whitewash_successes: usize,
    pub whitewash_fraction: f64,
    pub mean_offered_r_ini: f64,
    pub mean_w_estimate: f64,
    pub mean_w_max: f64,
}

/// What a peer has seen happen to its own neighbourhood since the last
/// estimation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counters {
    prev_size: usize,
    arrivals: usize,
    legit_departures: usize,
    other_departures: usize,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    rng: ChaCha8Rng,
    topology: Topology,
    agents: Population,
    estimators: BTreeMap<NodeId, EstimatorState>,
    counters: BTreeMap<NodeId, Counters>,
    tracker: GossipTracker,
    iteration: u64,
    mu: f64,
    r_ini_max: f64,
}

struct EstimationSummary {
    levels: Vec<(NodeId, f64)>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let t = &cfg.topology;
        let topology = match t.kind {
            TopologyKind::ScaleFree => Topology::generate_scale_free(t.n, cfg.attach_edges, &mut rng)?,
            TopologyKind::Regular => Topology::generate_regular(t.n, t.degree, &mut rng)?,
        };
        let agents = Population::generate(topology.node_ids(), cfg.r_ini_max0, &mut rng);
        let mut sim = Simulation {
            rng,
            estimators: BTreeMap::new(),
            counters: BTreeMap::new(),
            tracker: GossipTracker::new(cfg.gossip_period),
            iteration: 0,
            mu: agents.mean_reputation(),
            r_ini_max: cfg.r_ini_max0,
            topology,
            agents,
            cfg,
        };
        let ids: Vec<NodeId> = sim.topology.node_ids().collect();
        for id in ids {
            sim.register(id)?;
        }
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn agents(&self) -> &Population {
        &self.agents
    }

    pub fn estimator(&self, id: NodeId) -> Option<&EstimatorState> {
        self.estimators.get(&id)
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Current estimate of the largest offer.
    pub fn r_ini_max_estimate(&self) -> f64 {
        self.r_ini_max
    }

    /// Fresh estimator and counters for a node already in the topology.
    fn register(&mut self, id: NodeId) -> Result<(), EngineError> {
        let degree = self.topology.degree(id)?;
        self.estimators.insert(
            id,
            EstimatorState::new(id, self.cfg.window_n_prime, self.r_ini_max, self.cfg.r_ini_min),
        );
        self.counters.insert(id, Counters { prev_size: degree, ..Counters::default() });
        Ok(())
    }

    /// Counts arrivals for a batch of new nodes, oldest first: each node
    /// is an arrival for every older neighbour.
    fn record_arrivals(&mut self, new_ids: &[NodeId]) -> Result<(), EngineError> {
        for &id in new_ids {
            let older: Vec<NodeId> =
                self.topology.neighbors(id)?.iter().copied().filter(|&nb| nb < id).collect();
            for nb in &older {
                self.counters.get_mut(nb).expect("every node has counters").arrivals += 1;
            }
            self.register(id)?;
            self.counters.get_mut(&id).expect("just registered").prev_size = older.len();
        }
        Ok(())
    }

    /// Removes a node, charging its departure to every neighbour.
    fn depart(&mut self, id: NodeId) -> Result<(AgentState, Vec<NodeId>), EngineError> {
        let agent = self.agents.remove(id).ok_or(GraphError::UnknownNode(id))?;
        let class = classify_departure(agent.reputation, self.r_ini_max, self.cfg.r_ini_min);
        let former = self.topology.remove_node(id)?;
        for nb in &former {
            let c = self.counters.get_mut(nb).expect("every node has counters");
            match class {
                DepartureClass::Legitimate => c.legit_departures += 1,
                DepartureClass::PotentialWhitewasher => c.other_departures += 1,
            }
        }
        self.estimators.remove(&id);
        self.counters.remove(&id);
        Ok((agent, former))
    }

    /// Phase 1: returns the peers that intend to whitewash this iteration.
    fn serve(&mut self) -> Result<BTreeSet<NodeId>, EngineError> {
        let service = self.mu.powf(self.cfg.x) * REQUEST;
        let mut intents = BTreeSet::new();
        for agent in self.agents.iter_mut() {
            let attempting =
                agent.role == Role::PotentialWhitewasher && agent.draw_attempt(&mut self.rng);
            if attempting {
                intents.insert(agent.node);
                agent.record_round(0.0, REQUEST)?;
            } else {
                agent.record_round(service.min(REQUEST), REQUEST)?;
            }
        }
        Ok(intents)
    }

    /// Phase 2: gossip, per-node estimation and counter reset.
    fn estimate(&mut self) -> Result<EstimationSummary, EngineError> {
        let n = self.iteration;
        if self.tracker.is_gossip_round(n) {
            let snap = take_snapshot(
                &self.topology,
                &self.agents,
                n,
                self.cfg.gossip_noise,
                self.cfg.newcomer_horizon,
                &mut self.rng,
            );
            if self.cfg.adaptive_r_ini_max {
                self.r_ini_max = estimate_r_ini_max(snap.newcomer_mean_reputation, self.r_ini_max)
                    .clamp(self.cfg.r_ini_min, 1.0);
            }
            self.tracker.record(snap);
        }
        let n_cur = self.tracker.node_count_at(n).expect("recorded at iteration 1");
        let n_prev = self.tracker.node_count_at(n.saturating_sub(1)).expect("recorded at iteration 1");
        let d_avg = self.tracker.average_degree().expect("recorded at iteration 1");

        // Nodes, counters and estimators share one key set and are walked in
        // lockstep by ascending id.
        let adjacency: Vec<(NodeId, &[NodeId])> = self.topology.adjacency().collect();
        let index_of = |j: NodeId| {
            adjacency.binary_search_by_key(&j, |&(id, _)| id).expect("neighbour is a node")
        };
        let mut table = Vec::with_capacity(adjacency.len());
        for (&(j, nbs), (&cj, c)) in adjacency.iter().zip(&self.counters) {
            debug_assert_eq!(j, cj);
            let d_local = if nbs.is_empty() {
                d_avg
            } else {
                let total: usize = nbs.iter().map(|&nb| adjacency[index_of(nb)].1.len()).sum();
                total as f64 / nbs.len() as f64
            };
            table.push(NeighborhoodObservation {
                neighbor: j,
                prev_size: c.prev_size,
                cur_size: nbs.len(),
                arrivals: c.arrivals,
                legit_departures: c.legit_departures,
                local_growth: local_growth_rate(d_local, d_avg, n_cur, n_prev)?,
            });
        }

        let mut levels = Vec::with_capacity(adjacency.len());
        let mut obs = Vec::new();
        for (&(id, nbs), (&eid, est)) in adjacency.iter().zip(self.estimators.iter_mut()) {
            debug_assert_eq!(id, eid);
            obs.clear();
            obs.extend(nbs.iter().map(|&j| table[index_of(j)]));
            est.r_ini_max = self.r_ini_max;
            match whitewash_level(&obs) {
                Ok(w) => {
                    est.observe(w);
                    levels.push((id, w));
                }
                Err(EstimatorError::EmptyNeighborhood) => {}
                Err(e) => return Err(e.into()),
            }
        }

        for (id, c) in self.counters.iter_mut() {
            *c = Counters { prev_size: self.topology.degree(*id)?, ..Counters::default() };
        }
        Ok(EstimationSummary { levels })
    }

    /// Phase 4: attempts, rejoins and legitimate churn. Returns
    /// `(attempts, successes)`.
    fn whitewash(&mut self, intents: &BTreeSet<NodeId>) -> Result<(usize, usize), EngineError> {
        let n = self.iteration;
        let offers: Vec<(NodeId, f64)> =
            self.estimators.iter().map(|(id, e)| (*id, e.current_offer())).collect();
        let index: BTreeMap<NodeId, usize> =
            offers.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();

        let mut winners: Vec<(NodeId, f64)> = Vec::new();
        let mut attempts = 0;
        for &id in intents {
            if offers.len() < 2 {
                break;
            }
            attempts += 1;
            let own = index[&id];
            let mut pick = self.rng.gen_range(0..offers.len() - 1);
            if pick >= own {
                pick += 1;
            }
            let offer = offers[pick].1;
            let agent = self.agents.get_mut(id).expect("intent from a live agent");
            if agent.resolve_attempt(offer) == WhitewashDecision::Whitewashed {
                winners.push((id, offer));
            }
        }

        let mut leaving = Vec::with_capacity(winners.len());
        for &(id, offer) in &winners {
            let (agent, former) = self.depart(id)?;
            leaving.push((agent, former, offer));
        }
        let new_ids = match self.cfg.rejoin {
            RejoinMode::Preferential => {
                self.topology.grow(leaving.len(), self.cfg.attach_edges, &mut self.rng)?
            }
            RejoinMode::SameNeighbors => {
                let mut ids = Vec::with_capacity(leaving.len());
                for (_, former, _) in &leaving {
                    let id = self.topology.add_node();
                    let mut linked = false;
                    for &nb in former {
                        if self.topology.contains(nb) {
                            linked |= self.topology.add_edge(id, nb)?;
                        }
                    }
                    if !linked {
                        let picks = self.preferential_links(id)?;
                        linked = !picks.is_empty();
                    }
                    debug_assert!(linked || self.topology.node_count() == 1);
                    ids.push(id);
                }
                ids
            }
        };
        self.record_arrivals(&new_ids)?;
        for ((agent, _, offer), id) in leaving.into_iter().zip(&new_ids) {
            self.agents.insert(agent.rejoin_as_newcomer(*id, offer, n));
        }

        if self.cfg.departure_probability > 0.0 {
            let threshold = (self.r_ini_max + self.cfg.r_ini_min) / 2.0;
            let candidates: Vec<NodeId> = self
                .agents
                .iter()
                .filter(|a| !intents.contains(&a.node) && a.reputation >= threshold)
                .map(|a| a.node)
                .collect();
            for id in candidates {
                if self.agents.len() > 2 && self.rng.gen::<f64>() < self.cfg.departure_probability {
                    self.depart(id)?;
                }
            }
        }
        Ok((attempts, winners.len()))
    }

    /// Links an isolated node to `attach_edges` degree-weighted targets.
    fn preferential_links(&mut self, id: NodeId) -> Result<Vec<NodeId>, EngineError> {
        let mut pool: Vec<NodeId> = Vec::with_capacity(self.topology.degree_sum());
        for other in self.topology.node_ids().filter(|&o| o != id) {
            let d = self.topology.degree(other)?.max(1);
            pool.extend(std::iter::repeat_n(other, d));
        }
        let mut picks = Vec::new();
        let want = self.cfg.attach_edges.min(self.topology.node_count() - 1);
        while picks.len() < want {
            let &t = pool.choose(&mut self.rng).expect("another node exists");
            if !picks.contains(&t) {
                self.topology.add_edge(id, t)?;
                picks.push(t);
            }
        }
        Ok(picks)
    }

    /// Phase 5: newcomers arriving by preferential attachment.
    fn grow(&mut self) -> Result<(), EngineError> {
        if self.cfg.growth_percent_per_10 <= 0.0 || !self.iteration.is_multiple_of(GROWTH_INTERVAL) {
            return Ok(());
        }
        self.apply_growth()
    }

    fn apply_growth(&mut self) -> Result<(), EngineError> {
        let n = self.iteration;
        let count =
            (self.topology.node_count() as f64 * self.cfg.growth_percent_per_10 / 100.0).round() as usize;
        let new_ids = self.topology.grow(count, self.cfg.attach_edges, &mut self.rng)?;
        self.record_arrivals(&new_ids)?;
        for id in new_ids {
            let honesty: f64 = self.rng.gen();
            let first = self.topology.neighbors(id)?.first().copied();
            let offer = first
                .and_then(|t| self.estimators.get(&t))
                .map_or(self.r_ini_max, EstimatorState::current_offer);
            self.agents.insert(AgentState::new(id, honesty, self.r_ini_max, n, offer));
        }
        Ok(())
    }

    /// Runs one iteration and reports its metrics.
    pub fn step(&mut self) -> Result<IterationRecord, EngineError> {
        self.iteration += 1;
        let n = self.iteration;
        self.topology.set_clock(n);

        let intents = self.serve()?;
        let summary = self.estimate()?;
        self.mu = self.agents.mean_reputation();
        let count = self.estimators.len().max(1) as f64;
        let mean_offer = self.estimators.values().map(EstimatorState::current_offer).sum::<f64>() / count;
        let mean_w_max = self.estimators.values().map(EstimatorState::w_max).sum::<f64>() / count;
        let mean_w = if summary.levels.is_empty() {
            0.0
        } else {
            summary.levels.iter().map(|&(_, w)| w).sum::<f64>() / summary.levels.len() as f64
        };

        let (attempts, successes) = self.whitewash(&intents)?;
        self.grow()?;

        let n_nodes = self.topology.node_count();
        Ok(IterationRecord {
            iteration: n,
            n_nodes,
            whitewash_attempts: attempts,
            whitewash_successes: successes,
            whitewash_fraction: successes as f64 / n_nodes as f64,
            mean_offered_r_ini: mean_offer,
            mean_w_estimate: mean_w,
            mean_w_max,
        })
    }
}

/// Runs `cfg.iterations` steps from a fresh state.
pub fn run(cfg: &SimConfig) -> Result<Vec<IterationRecord>, EngineError> {
    let mut sim = Simulation::new(cfg.clone())?;
    (0..cfg.iterations).map(|_| sim.step()).collect()
}

/// Population-mean estimated whitewash level against the level computed
/// directly from the injection log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCheck {
    pub estimated: f64,
    pub truth: f64,
}

/// Forces `injected` randomly chosen peers to whitewash once, applies one
/// growth event if the config asks for growth, and runs a single
/// estimation cycle.
///
/// The truth for a peer is the number of injected rejoins that attached to
/// its neighbours, over the total size of its neighbours' neighbourhoods.
pub fn closed_world_estimator_check(cfg: &SimConfig, injected: usize) -> Result<EstimatorCheck, EngineError> {
    let mut sim = Simulation::new(cfg.clone())?;
    sim.iteration = 1;
    sim.topology.set_clock(1);
    let baseline = take_snapshot(&sim.topology, &sim.agents, 0, 0.0, cfg.newcomer_horizon, &mut sim.rng);
    sim.tracker.record(baseline);

    let mut ids: Vec<NodeId> = sim.topology.node_ids().collect();
    ids.shuffle(&mut sim.rng);
    ids.truncate(injected.min(ids.len().saturating_sub(1)));
    ids.sort();
    let mut offers = Vec::new();
    for &id in &ids {
        let agent = sim.agents.get_mut(id).expect("live node");
        agent.reputation = 0.0;
        offers.push(sim.estimators[&id].current_offer());
    }
    let mut leaving = Vec::new();
    for (&id, &offer) in ids.iter().zip(&offers) {
        let (agent, former) = sim.depart(id)?;
        leaving.push((agent, former, offer));
    }
    let new_ids = match cfg.rejoin {
        RejoinMode::Preferential => sim.topology.grow(leaving.len(), cfg.attach_edges, &mut sim.rng)?,
        RejoinMode::SameNeighbors => {
            let mut out = Vec::new();
            for (_, former, _) in &leaving {
                let id = sim.topology.add_node();
                for &nb in former {
                    if sim.topology.contains(nb) {
                        sim.topology.add_edge(id, nb)?;
                    }
                }
                out.push(id);
            }
            out
        }
    };
    let mut rejoin_log: BTreeMap<NodeId, usize> = BTreeMap::new();
    for &id in &new_ids {
        for &nb in sim.topology.neighbors(id)? {
            if nb < id {
                *rejoin_log.entry(nb).or_default() += 1;
            }
        }
    }
    sim.record_arrivals(&new_ids)?;
    for ((agent, _, offer), id) in leaving.into_iter().zip(&new_ids) {
        sim.agents.insert(agent.rejoin_as_newcomer(*id, offer, 1));
    }
    if cfg.growth_percent_per_10 > 0.0 {
        sim.apply_growth()?;
    }

    let summary = sim.estimate()?;
    let mut truth_sum = 0.0;
    let mut est_sum = 0.0;
    for &(id, w) in &summary.levels {
        let nbs = sim.topology.neighbors(id)?;
        let hits: usize = nbs.iter().map(|j| rejoin_log.get(j).copied().unwrap_or(0)).sum();
        let slots: usize = nbs.iter().map(|&j| sim.topology.degree(j)).sum::<Result<usize, _>>()?;
        truth_sum += hits as f64 / slots as f64;
        est_sum += w;
    }
    let count = summary.levels.len().max(1) as f64;
    Ok(EstimatorCheck { estimated: est_sum / count, truth: truth_sum / count })
}
