//! Per-peer behavioural state.
//!
//! Every peer carries a fixed honesty level drawn uniformly from `[0, 1]`.
//! A peer whitewashes whenever the initial reputation it is offered on
//! rejoining is at least its honesty, so peers whose honesty lies below the
//! largest offer the network can make are potential whitewashers.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("reputation undefined: nothing was requested")]
    UndefinedReputation,
    #[error("invalid resource amounts: provided {provided}, requested {requested}")]
    InvalidResources { provided: f64, requested: f64 },
    #[error("node {0} is cooperative and never whitewashes")]
    WrongRole(NodeId),
    #[error("invalid population config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Cooperative,
    PotentialWhitewasher,
}

/// Outcome of one whitewash decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhitewashDecision {
    NoAttempt,
    AttemptFailed,
    Whitewashed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub node: NodeId,
    pub honesty: f64,
    pub role: Role,
    pub reputation: f64,
    pub attempts: u32,
    pub successes: u32,
    pub joined_at: u64,
    /// Resource served in the latest round.
    pub resource_provided: f64,
    /// Resource asked of this peer in the latest round.
    pub resource_requested: f64,
}

impl AgentState {
    /// A peer whose role follows from comparing its honesty with the
    /// largest initial reputation currently on offer.
    pub fn new(node: NodeId, honesty: f64, r_ini_max: f64, joined_at: u64, reputation: f64) -> Self {
        let role =
            if honesty < r_ini_max { Role::PotentialWhitewasher } else { Role::Cooperative };
        AgentState {
            node,
            honesty,
            role,
            reputation: reputation.clamp(0.0, 1.0),
            attempts: 0,
            successes: 0,
            joined_at,
            resource_provided: 0.0,
            resource_requested: 0.0,
        }
    }

    /// Lifetime success rate over whitewash attempts; 1 before the first
    /// attempt.
    pub fn attempt_probability(&self) -> f64 {
        if self.attempts == 0 {
            1.0
        } else {
            f64::from(self.successes) / f64::from(self.attempts)
        }
    }

    /// Bernoulli draw on [`attempt_probability`](Self::attempt_probability).
    /// Consumes exactly one uniform draw.
    pub fn draw_attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.gen::<f64>() < self.attempt_probability()
    }

    /// Settles an attempt against an offer and updates the counters. A tie
    /// counts as a successful whitewash.
    pub fn resolve_attempt(&mut self, offered_r_ini: f64) -> WhitewashDecision {
        self.attempts += 1;
        if offered_r_ini >= self.honesty {
            self.successes += 1;
            WhitewashDecision::Whitewashed
        } else {
            WhitewashDecision::AttemptFailed
        }
    }

    pub fn decide_whitewash<R: Rng + ?Sized>(
        &mut self,
        offered_r_ini: f64,
        rng: &mut R,
    ) -> Result<WhitewashDecision, AgentError> {
        if self.role != Role::PotentialWhitewasher {
            return Err(AgentError::WrongRole(self.node));
        }
        if !self.draw_attempt(rng) {
            return Ok(WhitewashDecision::NoAttempt);
        }
        Ok(self.resolve_attempt(offered_r_ini))
    }

    /// Records one round of service and refreshes the reputation. A round
    /// with nothing requested leaves the reputation untouched.
    pub fn record_round(&mut self, provided: f64, requested: f64) -> Result<f64, AgentError> {
        self.resource_provided = provided;
        self.resource_requested = requested;
        match measure_reputation(provided, requested) {
            Ok(rep) => {
                self.reputation = rep;
                Ok(rep)
            }
            Err(AgentError::UndefinedReputation) => Ok(self.reputation),
            Err(e) => Err(e),
        }
    }

    /// The same peer under a fresh identity: honesty and lifetime counters
    /// carry over, reputation restarts at the offer it accepted.
    pub fn rejoin_as_newcomer(&self, new_id: NodeId, offered_r_ini: f64, iteration: u64) -> Self {
        AgentState {
            node: new_id,
            reputation: offered_r_ini.clamp(0.0, 1.0),
            joined_at: iteration,
            resource_provided: 0.0,
            resource_requested: 0.0,
            ..self.clone()
        }
    }
}

/// Served resource over requested resource.
pub fn measure_reputation(provided: f64, requested: f64) -> Result<f64, AgentError> {
    if requested == 0.0 {
        return Err(AgentError::UndefinedReputation);
    }
    if !(requested > 0.0) || !(0.0..=requested).contains(&provided) {
        return Err(AgentError::InvalidResources { provided, requested });
    }
    Ok(provided / requested)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub size: usize,
    pub r_ini_max: f64,
    pub r_ini_min: f64,
    pub seed: u64,
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0 <= self.r_ini_min && self.r_ini_min < self.r_ini_max && self.r_ini_max <= 1.0) {
            return Err(AgentError::InvalidConfig(format!(
                "need 0 <= r_ini_min < r_ini_max <= 1, got {} and {}",
                self.r_ini_min, self.r_ini_max
            )));
        }
        Ok(())
    }
}

/// All live peers, keyed by their current identity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Population {
    agents: BTreeMap<NodeId, AgentState>,
}

impl Population {
    /// One agent per id, honesty i.i.d. uniform on `[0, 1]`, reputation
    /// starting at `r_ini_max`.
    pub fn generate<R, I>(ids: I, r_ini_max: f64, rng: &mut R) -> Self
    where
        R: Rng + ?Sized,
        I: IntoIterator<Item = NodeId>,
    {
        let agents = ids
            .into_iter()
            .map(|id| {
                let honesty: f64 = rng.gen();
                (id, AgentState::new(id, honesty, r_ini_max, 0, r_ini_max))
            })
            .collect();
        Population { agents }
    }

    pub fn get(&self, id: NodeId) -> Option<&AgentState> {
        self.agents.get(&id)
    }

    pub fn get_mut(&mut self, id: NodeId) -> Option<&mut AgentState> {
        self.agents.get_mut(&id)
    }

    pub fn insert(&mut self, agent: AgentState) {
        self.agents.insert(agent.node, agent);
    }

    pub fn remove(&mut self, id: NodeId) -> Option<AgentState> {
        self.agents.remove(&id)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut AgentState> {
        self.agents.values_mut()
    }

    pub fn whitewasher_fraction(&self) -> f64 {
        if self.agents.is_empty() {
            return 0.0;
        }
        let n = self.iter().filter(|a| a.role == Role::PotentialWhitewasher).count();
        n as f64 / self.agents.len() as f64
    }

    pub fn mean_reputation(&self) -> f64 {
        if self.agents.is_empty() {
            return 0.0;
        }
        self.iter().map(|a| a.reputation).sum::<f64>() / self.agents.len() as f64
    }
}

/// Population with ids `0..size`, seeded from the config.
pub fn init_population(cfg: &PopulationConfig) -> Result<Population, AgentError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(Population::generate((0..cfg.size as u64).map(NodeId), cfg.r_ini_max, &mut rng))
}
