//! Whitewashing defence for unstructured peer-to-peer networks.
//!
//! Peers estimate how much of the recent churn in their neighbourhood is
//! unexplained by growth and legitimate departures, and shrink the initial
//! reputation they grant newcomers accordingly. The crate bundles the
//! network model ([`graph`], [`gossip`], [`agents`]), the per-peer
//! estimator ([`estimator`]), the closed-form economics ([`payoff`]), the
//! timing game ([`game`]) and the simulation loop ([`engine`]).

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod engine;
pub mod estimator;
pub mod game;
pub mod gossip;
pub mod graph;
pub mod payoff;
