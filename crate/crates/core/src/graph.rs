//! Undirected network topologies.
//!
//! Two families are supported: growing scale-free graphs built by
//! preferential attachment, and fixed random regular graphs built by the
//! pairing model. Both can be mutated afterwards (departures, preferential
//! re-attachment) and expose the degree statistics the whitewash estimator
//! works from.
//!
//! Node ids are handed out monotonically and never recycled, so a peer that
//! leaves and comes back is a brand new id.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque identifier of a peer in a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    ScaleFree,
    Regular,
}

impl TopologyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TopologyKind::ScaleFree => "scale_free",
            TopologyKind::Regular => "regular",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scale_free" => Ok(TopologyKind::ScaleFree),
            "regular" => Ok(TopologyKind::Regular),
            other => Err(GraphError::InvalidParameter(format!("unknown topology kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no simple {degree}-regular graph on {n} nodes")]
    InfeasibleRegular { n: usize, degree: usize },
    #[error("pairing model gave up after {0} restarts")]
    PairingExhausted(u32),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} has no neighbours")]
    IsolatedNode(NodeId),
    #[error("edge list line {line}: {reason}")]
    EdgeList { line: usize, reason: String },
}

/// Restarts allowed before the regular-graph pairing gives up.
pub const PAIRING_RETRY_CAP: u32 = 100;

#[derive(Debug, Clone, PartialEq)]
struct NodeEntry {
    neighbors: Vec<NodeId>,
    created: u64,
}

/// A simple undirected graph with stable, never-reused node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    kind: TopologyKind,
    nodes: BTreeMap<NodeId, NodeEntry>,
    next_id: u64,
    edge_count: usize,
    clock: u64,
}

impl Topology {
    pub fn new(kind: TopologyKind) -> Self {
        Topology { kind, nodes: BTreeMap::new(), next_id: 0, edge_count: 0, clock: 0 }
    }

    /// Builds a connected scale-free graph by Barabási–Albert preferential
    /// attachment.
    ///
    /// The seed core is a clique on `attach_edges + 1` nodes (or on all `n`
    /// nodes when `n` is smaller), and every later node attaches
    /// `attach_edges` distinct edges to targets chosen proportionally to
    /// their current degree.
    pub fn generate_scale_free<R: Rng + ?Sized>(
        n: usize,
        attach_edges: usize,
        rng: &mut R,
    ) -> Result<Self, GraphError> {
        if attach_edges == 0 {
            return Err(GraphError::InvalidParameter("attach_edges must be at least 1".into()));
        }
        if n < attach_edges {
            return Err(GraphError::InvalidParameter(format!(
                "n = {n} is smaller than attach_edges = {attach_edges}"
            )));
        }
        let mut t = Topology::new(TopologyKind::ScaleFree);
        let core = n.min(attach_edges + 1);
        let ids: Vec<NodeId> = (0..core).map(|_| t.add_node()).collect();
        for (i, &u) in ids.iter().enumerate() {
            for &v in &ids[i + 1..] {
                t.add_edge(u, v)?;
            }
        }
        t.grow(n - core, attach_edges, rng)?;
        Ok(t)
    }

    /// Builds a uniformly-paired random `degree`-regular simple graph.
    ///
    /// Degree stubs are paired at random; a pair that would form a self-loop
    /// or a parallel edge is redrawn, and the whole pairing restarts when
    /// the remaining stubs admit no valid pair. At most
    /// [`PAIRING_RETRY_CAP`] restarts are attempted.
    pub fn generate_regular<R: Rng + ?Sized>(
        n: usize,
        degree: usize,
        rng: &mut R,
    ) -> Result<Self, GraphError> {
        if n == 0 || degree >= n || (n * degree) % 2 == 1 {
            return Err(GraphError::InfeasibleRegular { n, degree });
        }
        for _ in 0..PAIRING_RETRY_CAP {
            if let Some(t) = Self::try_pairing(n, degree, rng) {
                return Ok(t);
            }
        }
        Err(GraphError::PairingExhausted(PAIRING_RETRY_CAP))
    }

    fn try_pairing<R: Rng + ?Sized>(n: usize, degree: usize, rng: &mut R) -> Option<Self> {
        let mut t = Topology::new(TopologyKind::Regular);
        let ids: Vec<NodeId> = (0..n).map(|_| t.add_node()).collect();
        let mut stubs: Vec<NodeId> =
            ids.iter().flat_map(|&id| std::iter::repeat_n(id, degree)).collect();
        let mut misses = 0usize;
        while !stubs.is_empty() {
            let i = rng.gen_range(0..stubs.len());
            let mut j = rng.gen_range(0..stubs.len() - 1);
            if j >= i {
                j += 1;
            }
            let (u, v) = (stubs[i], stubs[j]);
            if u != v && !t.has_edge(u, v) {
                t.add_edge(u, v).expect("both endpoints exist");
                let (hi, lo) = if i > j { (i, j) } else { (j, i) };
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                misses = 0;
                continue;
            }
            misses += 1;
            if misses > 64 + 4 * stubs.len() && !t.has_valid_pair(&stubs) {
                return None;
            }
        }
        Some(t)
    }

    fn has_valid_pair(&self, stubs: &[NodeId]) -> bool {
        stubs.iter().enumerate().any(|(i, &u)| {
            stubs[i + 1..].iter().any(|&v| u != v && !self.has_edge(u, v))
        })
    }

    /// Adds `new_nodes` nodes by preferential attachment and returns their ids.
    ///
    /// Arrivals within one call see each other: a node added earlier in the
    /// batch is a valid target for later ones, weighted by its degree.
    /// Isolated nodes carry zero weight; when the degree-weighted pool cannot
    /// supply enough distinct targets the remainder is drawn uniformly.
    pub fn grow<R: Rng + ?Sized>(
        &mut self,
        new_nodes: usize,
        attach_edges: usize,
        rng: &mut R,
    ) -> Result<Vec<NodeId>, GraphError> {
        if self.nodes.is_empty() {
            return Err(GraphError::InvalidParameter("cannot grow an empty topology".into()));
        }
        if new_nodes == 0 {
            return Ok(Vec::new());
        }
        if attach_edges == 0 {
            return Err(GraphError::InvalidParameter("attach_edges must be at least 1".into()));
        }
        let mut pool = self.endpoint_pool();
        let mut ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        let mut added = Vec::with_capacity(new_nodes);
        for _ in 0..new_nodes {
            let targets = pick_preferential(&pool, &ids, attach_edges, rng);
            let id = self.add_node();
            for t in targets {
                self.add_edge(id, t)?;
                pool.push(t);
                pool.push(id);
            }
            ids.push(id);
            added.push(id);
        }
        Ok(added)
    }

    /// Every node repeated once per incident edge, in id order.
    fn endpoint_pool(&self) -> Vec<NodeId> {
        let mut pool = Vec::with_capacity(2 * self.edge_count);
        for (&id, entry) in &self.nodes {
            pool.extend(std::iter::repeat_n(id, entry.neighbors.len()));
        }
        pool
    }

    /// Adds an isolated node stamped with the current clock.
    pub fn add_node(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(id, NodeEntry { neighbors: Vec::new(), created: self.clock });
        id
    }

    /// Adds the edge `u`–`v`. Returns `false` if it already existed.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<bool, GraphError> {
        if u == v {
            return Err(GraphError::InvalidParameter(format!("self-loop on {u}")));
        }
        if !self.nodes.contains_key(&v) {
            return Err(GraphError::UnknownNode(v));
        }
        let eu = self.nodes.get_mut(&u).ok_or(GraphError::UnknownNode(u))?;
        if eu.neighbors.contains(&v) {
            return Ok(false);
        }
        eu.neighbors.push(v);
        self.nodes.get_mut(&v).expect("checked above").neighbors.push(u);
        self.edge_count += 1;
        Ok(true)
    }

    /// Removes a node and all its incident edges. Returns its former
    /// neighbours.
    pub fn remove_node(&mut self, id: NodeId) -> Result<Vec<NodeId>, GraphError> {
        let entry = self.nodes.remove(&id).ok_or(GraphError::UnknownNode(id))?;
        for nb in &entry.neighbors {
            let list = &mut self.nodes.get_mut(nb).expect("adjacency is symmetric").neighbors;
            let pos = list.iter().position(|x| *x == id).expect("adjacency is symmetric");
            list.swap_remove(pos);
        }
        self.edge_count -= entry.neighbors.len();
        Ok(entry.neighbors)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.nodes.get(&u).is_some_and(|e| e.neighbors.contains(&v))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Current node ids in increasing order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    /// Every node with its neighbours, in ascending id order.
    pub fn adjacency(&self) -> impl Iterator<Item = (NodeId, &[NodeId])> + '_ {
        self.nodes.iter().map(|(&id, e)| (id, e.neighbors.as_slice()))
    }

    pub fn neighbors(&self, id: NodeId) -> Result<&[NodeId], GraphError> {
        self.nodes.get(&id).map(|e| e.neighbors.as_slice()).ok_or(GraphError::UnknownNode(id))
    }

    pub fn degree(&self, id: NodeId) -> Result<usize, GraphError> {
        self.neighbors(id).map(<[NodeId]>::len)
    }

    /// Iteration at which the node was created.
    pub fn created_at(&self, id: NodeId) -> Result<u64, GraphError> {
        self.nodes.get(&id).map(|e| e.created).ok_or(GraphError::UnknownNode(id))
    }

    /// Sets the iteration stamp given to nodes added from now on.
    pub fn set_clock(&mut self, iteration: u64) {
        self.clock = iteration;
    }

    pub fn degree_sum(&self) -> usize {
        2 * self.edge_count
    }

    /// `2·|E| / |V|`; zero for an empty graph.
    pub fn average_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        self.degree_sum() as f64 / self.nodes.len() as f64
    }

    /// Mean degree of the node's neighbours.
    pub fn local_average_degree(&self, id: NodeId) -> Result<f64, GraphError> {
        let nbs = self.neighbors(id)?;
        if nbs.is_empty() {
            return Err(GraphError::IsolatedNode(id));
        }
        let total: usize = nbs.iter().map(|nb| self.nodes[nb].neighbors.len()).sum();
        Ok(total as f64 / nbs.len() as f64)
    }

    pub fn max_degree(&self) -> usize {
        self.nodes.values().map(|e| e.neighbors.len()).max().unwrap_or(0)
    }

    /// Checks symmetry, absence of self-loops and parallel edges, and the
    /// handshake identity. Returns a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut degree_total = 0usize;
        for (&id, entry) in &self.nodes {
            degree_total += entry.neighbors.len();
            for (k, nb) in entry.neighbors.iter().enumerate() {
                if *nb == id {
                    return Err(format!("self-loop on {id}"));
                }
                if entry.neighbors[..k].contains(nb) {
                    return Err(format!("parallel edge {id}-{nb}"));
                }
                match self.nodes.get(nb) {
                    None => return Err(format!("{id} points at missing node {nb}")),
                    Some(other) if !other.neighbors.contains(&id) => {
                        return Err(format!("edge {id}->{nb} has no reverse"))
                    }
                    Some(_) => {}
                }
            }
        }
        if degree_total != 2 * self.edge_count {
            return Err(format!("degree sum {degree_total} != 2 x {} edges", self.edge_count));
        }
        Ok(())
    }

    /// Sorted `(u, v)` pairs with `u < v`.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (&u, entry) in &self.nodes {
            let mut nbs: Vec<NodeId> = entry.neighbors.iter().copied().filter(|v| *v > u).collect();
            nbs.sort_unstable();
            out.extend(nbs.into_iter().map(|v| (u, v)));
        }
        out
    }

    /// Writes the edge-list dump: a `# nodes=<n> kind=<kind> seed=<seed>`
    /// header followed by one `u v` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W, seed: u64) -> io::Result<()> {
        writeln!(out, "# nodes={} kind={} seed={}", self.node_count(), self.kind, seed)?;
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }
}

/// Parsed contents of an edge-list dump.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeListDump {
    pub nodes: usize,
    pub kind: TopologyKind,
    pub seed: u64,
    pub edges: Vec<(NodeId, NodeId)>,
}

pub fn parse_edge_list(text: &str) -> Result<EdgeListDump, GraphError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(GraphError::EdgeList { line: 1, reason: "missing header".into() })?;
    let bad = |line: usize, reason: &str| GraphError::EdgeList { line, reason: reason.into() };
    let fields = header.strip_prefix("# ").ok_or_else(|| bad(1, "header must start with `# `"))?;
    let (mut nodes, mut kind, mut seed) = (None, None, None);
    for field in fields.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| bad(1, "expected key=value"))?;
        match key {
            "nodes" => nodes = Some(value.parse().map_err(|_| bad(1, "bad node count"))?),
            "kind" => kind = Some(value.parse().map_err(|_| bad(1, "bad kind"))?),
            "seed" => seed = Some(value.parse().map_err(|_| bad(1, "bad seed"))?),
            _ => return Err(bad(1, "unknown header key")),
        }
    }
    let mut edges = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut next_id = || -> Result<NodeId, GraphError> {
            let raw = parts.next().ok_or_else(|| bad(idx + 1, "expected `u v`"))?;
            raw.parse().map(NodeId).map_err(|_| bad(idx + 1, "node id is not an integer"))
        };
        let (u, v) = (next_id()?, next_id()?);
        if parts.next().is_some() {
            return Err(bad(idx + 1, "trailing tokens"));
        }
        edges.push((u, v));
    }
    Ok(EdgeListDump {
        nodes: nodes.ok_or_else(|| bad(1, "missing nodes="))?,
        kind: kind.ok_or_else(|| bad(1, "missing kind="))?,
        seed: seed.ok_or_else(|| bad(1, "missing seed="))?,
        edges,
    })
}

/// Draws up to `k` distinct targets, degree-weighted via the endpoint pool.
fn pick_preferential<R: Rng + ?Sized>(
    pool: &[NodeId],
    ids: &[NodeId],
    k: usize,
    rng: &mut R,
) -> Vec<NodeId> {
    let want = k.min(ids.len());
    let mut chosen: Vec<NodeId> = Vec::with_capacity(want);
    if !pool.is_empty() {
        let mut budget = 32 * want + 32;
        while chosen.len() < want && budget > 0 {
            let cand = pool[rng.gen_range(0..pool.len())];
            if !chosen.contains(&cand) {
                chosen.push(cand);
            }
            budget -= 1;
        }
    }
    while chosen.len() < want {
        let cand = ids[rng.gen_range(0..ids.len())];
        if !chosen.contains(&cand) {
            chosen.push(cand);
        }
    }
    chosen
}
