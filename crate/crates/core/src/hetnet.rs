//! Typed, weighted, undirected co-occurrence network over time clusters,
//! location clusters and words.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use crate::cluster::ClusterModel;
use crate::ingest::Record;

/// Node types, in the order nodes are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeType {
    T,
    L,
    W,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::T, NodeType::L, NodeType::W];

    pub fn as_char(&self) -> char {
        match self {
            NodeType::T => 'T',
            NodeType::L => 'L',
            NodeType::W => 'W',
        }
    }

    fn slot(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for NodeType {
    type Err = NodeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" => Ok(NodeType::T),
            "L" => Ok(NodeType::L),
            "W" => Ok(NodeType::W),
            _ => Err(NodeParseError(s.to_string())),
        }
    }
}

/// A typed node: a cluster index for `T`/`L`, a word for `W`.
///
/// Ordering is by type, then by key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Time(u32),
    Location(u32),
    Word(String),
}

impl NodeId {
    pub fn word(w: impl Into<String>) -> Self {
        NodeId::Word(w.into())
    }

    pub fn node_type(&self) -> NodeType {
        match self {
            NodeId::Time(_) => NodeType::T,
            NodeId::Location(_) => NodeType::L,
            NodeId::Word(_) => NodeType::W,
        }
    }

    pub fn cluster_index(&self) -> Option<u32> {
        match self {
            NodeId::Time(i) | NodeId::Location(i) => Some(*i),
            NodeId::Word(_) => None,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Time(i) => write!(f, "T:{i}"),
            NodeId::Location(i) => write!(f, "L:{i}"),
            NodeId::Word(w) => write!(f, "W:{w}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed node token {0:?}")]
pub struct NodeParseError(pub String);

impl FromStr for NodeId {
    type Err = NodeParseError;

    /// Parses `type:key`, e.g. `W:beach` or `L:17`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NodeParseError(s.to_string());
        let (ty, key) = s.split_once(':').ok_or_else(bad)?;
        match ty.parse::<NodeType>().map_err(|_| bad())? {
            NodeType::T => key.parse().map(NodeId::Time).map_err(|_| bad()),
            NodeType::L => key.parse().map(NodeId::Location).map_err(|_| bad()),
            NodeType::W if !key.is_empty() && !key.contains(char::is_whitespace) => {
                Ok(NodeId::Word(key.to_string()))
            }
            NodeType::W => Err(bad()),
        }
    }
}

/// A record after clustering: its time cluster, location cluster and
/// keyword set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteredRecord {
    pub time: u32,
    pub location: u32,
    pub keywords: Vec<String>,
}

impl ClusteredRecord {
    /// Assigns a vocabulary-restricted record to its nearest time and
    /// location modes.
    ///
    /// Panics if either model is empty or of the wrong modality.
    pub fn from_record(r: &Record, time_model: &ClusterModel, space_model: &ClusterModel) -> Self {
        let time = time_model.assign_timestamp(r.timestamp).expect("time model");
        let location = space_model.assign_location(r.location).expect("space model");
        Self {
            time: time as u32,
            location: location as u32,
            keywords: r.keywords.clone(),
        }
    }
}

/// All unordered pairs among `{T_r, L_r, w_1..w_m}`, keywords deduplicated
/// first; `(m+2)(m+1)/2` pairs, each returned as `(smaller, larger)`.
pub fn record_edges(r: &ClusteredRecord) -> Vec<(NodeId, NodeId)> {
    let mut words: Vec<&str> = r.keywords.iter().map(String::as_str).collect();
    words.sort_unstable();
    words.dedup();
    let mut nodes = Vec::with_capacity(words.len() + 2);
    nodes.push(NodeId::Time(r.time));
    nodes.push(NodeId::Location(r.location));
    nodes.extend(words.into_iter().map(NodeId::word));
    let mut pairs = Vec::with_capacity(nodes.len() * (nodes.len() - 1) / 2);
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            pairs.push((nodes[i].clone(), nodes[j].clone()));
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("self-loop on {0}")]
    SelfLoop(NodeId),
    #[error("edge weight must be at least 1 between {0} and {1}")]
    ZeroWeight(NodeId, NodeId),
    #[error("duplicate edge {0} - {1}")]
    DuplicateEdge(NodeId, NodeId),
}

/// Accumulates co-occurrence counts. Builders over disjoint shards can be
/// merged in any order.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    counts: BTreeMap<(NodeId, NodeId), u64>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_record(&mut self, r: &ClusteredRecord) {
        for pair in record_edges(r) {
            *self.counts.entry(pair).or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: GraphBuilder) {
        for (pair, w) in other.counts {
            *self.counts.entry(pair).or_insert(0) += w;
        }
    }

    pub fn build(self) -> HetGraph {
        HetGraph::from_canonical(self.counts)
    }
}

/// Builds the network from a record stream.
pub fn build_network<'a>(records: impl IntoIterator<Item = &'a ClusteredRecord>) -> HetGraph {
    let mut b = GraphBuilder::new();
    for r in records {
        b.add_record(r);
    }
    b.build()
}

/// Dense index of a node inside one [`HetGraph`].
pub type NodeIndex = u32;

/// Immutable adjacency form of the network.
///
/// Nodes are sorted by [`NodeId`] order, so each type occupies a contiguous
/// index range and every neighbour list is sorted by type and then key.
/// Each undirected edge is held once per endpoint with the same weight.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HetGraph {
    nodes: Vec<NodeId>,
    index: BTreeMap<NodeId, NodeIndex>,
    type_ranges: [Range<NodeIndex>; 3],
    offsets: Vec<usize>,
    targets: Vec<NodeIndex>,
    weights: Vec<u64>,
    /// Inclusive running sum of `weights` within each node's list.
    cumulative: Vec<u64>,
}

/// The slice of one node's neighbours that share a type.
#[derive(Debug, Clone, Copy)]
pub struct TypedNeighbors<'g> {
    pub targets: &'g [NodeIndex],
    pub weights: &'g [u64],
    /// Running weight sums, offset by `base`.
    pub cumulative: &'g [u64],
    pub base: u64,
}

impl TypedNeighbors<'_> {
    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.cumulative.last().map_or(0, |c| c - self.base)
    }

    /// The neighbour whose cumulative interval contains `r`,
    /// `0 <= r < total_weight()`.
    pub fn pick(&self, r: u64) -> NodeIndex {
        let target = self.base + r;
        let i = self.cumulative.partition_point(|&c| c <= target);
        self.targets[i]
    }
}

impl HetGraph {
    /// Builds from an iterator of weighted edges in either orientation.
    pub fn from_edges(
        edges: impl IntoIterator<Item = (NodeId, NodeId, u64)>,
    ) -> Result<Self, GraphError> {
        let mut counts = BTreeMap::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if w == 0 {
                return Err(GraphError::ZeroWeight(a, b));
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if counts.contains_key(&key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            counts.insert(key, w);
        }
        Ok(Self::from_canonical(counts))
    }

    fn from_canonical(counts: BTreeMap<(NodeId, NodeId), u64>) -> Self {
        let mut index: BTreeMap<NodeId, NodeIndex> = BTreeMap::new();
        for (a, b) in counts.keys() {
            index.entry(a.clone()).or_insert(0);
            index.entry(b.clone()).or_insert(0);
        }
        let mut nodes = Vec::with_capacity(index.len());
        for (i, (node, slot)) in index.iter_mut().enumerate() {
            *slot = i as NodeIndex;
            nodes.push(node.clone());
        }
        let mut type_ranges: [Range<NodeIndex>; 3] = [0..0, 0..0, 0..0];
        for t in NodeType::ALL {
            let lo = nodes.partition_point(|n| n.node_type() < t) as NodeIndex;
            let hi = nodes.partition_point(|n| n.node_type() <= t) as NodeIndex;
            type_ranges[t.slot()] = lo..hi;
        }

        let n = nodes.len();
        let mut degree = alloc::vec![0usize; n];
        let pairs: Vec<(NodeIndex, NodeIndex, u64)> = counts
            .into_iter()
            .map(|((a, b), w)| (index[&a], index[&b], w))
            .collect();
        for &(a, b, _) in &pairs {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let m = *offsets.last().unwrap();
        let mut targets = alloc::vec![0 as NodeIndex; m];
        let mut weights = alloc::vec![0u64; m];
        let mut fill = offsets[..n].to_vec();
        for &(a, b, w) in &pairs {
            for (from, to) in [(a, b), (b, a)] {
                let slot = &mut fill[from as usize];
                targets[*slot] = to;
                weights[*slot] = w;
                *slot += 1;
            }
        }
        for u in 0..n {
            let (lo, hi) = (offsets[u], offsets[u + 1]);
            let mut row: Vec<(NodeIndex, u64)> =
                targets[lo..hi].iter().copied().zip(weights[lo..hi].iter().copied()).collect();
            row.sort_unstable_by_key(|&(t, _)| t);
            for (k, (t, w)) in row.into_iter().enumerate() {
                targets[lo + k] = t;
                weights[lo + k] = w;
            }
        }
        let mut cumulative = alloc::vec![0u64; m];
        for u in 0..n {
            let mut acc = 0u64;
            for k in offsets[u]..offsets[u + 1] {
                acc += weights[k];
                cumulative[k] = acc;
            }
        }
        Self {
            nodes,
            index,
            type_ranges,
            offsets,
            targets,
            weights,
            cumulative,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, i: NodeIndex) -> &NodeId {
        &self.nodes[i as usize]
    }

    pub fn index_of(&self, node: &NodeId) -> Result<NodeIndex, GraphError> {
        self.index
            .get(node)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(node.clone()))
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.index.contains_key(node)
    }

    pub fn node_type(&self, i: NodeIndex) -> NodeType {
        self.nodes[i as usize].node_type()
    }

    /// Index range of the nodes of one type.
    pub fn nodes_of_type(&self, t: NodeType) -> Range<NodeIndex> {
        self.type_ranges[t.slot()].clone()
    }

    /// Neighbours of `u` of type `t`, sorted by key.
    pub fn typed_neighbors(&self, u: NodeIndex, t: NodeType) -> TypedNeighbors<'_> {
        let (lo, hi) = (self.offsets[u as usize], self.offsets[u as usize + 1]);
        let row = &self.targets[lo..hi];
        let range = &self.type_ranges[t.slot()];
        let a = lo + row.partition_point(|&v| v < range.start);
        let b = lo + row.partition_point(|&v| v < range.end);
        TypedNeighbors {
            targets: &self.targets[a..b],
            weights: &self.weights[a..b],
            cumulative: &self.cumulative[a..b],
            base: if a > lo { self.cumulative[a - 1] } else { 0 },
        }
    }

    /// All `(neighbour, weight)` pairs of `u`.
    pub fn neighbors(&self, u: NodeIndex) -> impl Iterator<Item = (NodeIndex, u64)> + '_ {
        let (lo, hi) = (self.offsets[u as usize], self.offsets[u as usize + 1]);
        self.targets[lo..hi].iter().copied().zip(self.weights[lo..hi].iter().copied())
    }

    /// Adjacent nodes of type `t` with their weights, sorted by key.
    pub fn neighbors_of_type(
        &self,
        u: &NodeId,
        t: NodeType,
    ) -> Result<Vec<(NodeId, u64)>, GraphError> {
        let ui = self.index_of(u)?;
        let tn = self.typed_neighbors(ui, t);
        Ok(tn
            .targets
            .iter()
            .zip(tn.weights)
            .map(|(&v, &w)| (self.nodes[v as usize].clone(), w))
            .collect())
    }

    pub fn weight(&self, u: &NodeId, v: &NodeId) -> Option<u64> {
        let (ui, vi) = (self.index.get(u)?, self.index.get(v)?);
        let (lo, hi) = (self.offsets[*ui as usize], self.offsets[*ui as usize + 1]);
        let row = &self.targets[lo..hi];
        row.binary_search(vi).ok().map(|k| self.weights[lo + k])
    }

    /// Every edge once, as `(smaller, larger, weight)` in index order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeIndex, NodeIndex, u64)> + '_ {
        (0..self.nodes.len() as NodeIndex).flat_map(move |u| {
            self.neighbors(u).filter(move |&(v, _)| v > u).map(move |(v, w)| (u, v, w))
        })
    }

    pub fn total_weight(&self) -> u64 {
        self.edges().map(|(_, _, w)| w).sum()
    }
}
