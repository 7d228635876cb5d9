//! Metapath-guided, edge-weighted random walks.
//!
//! A walk from `u` picks its next node among neighbours of the type the
//! metapath prescribes, with probability proportional to edge weight. Walks
//! longer than the metapath keep cycling it, sharing the endpoint type once:
//! `W-W-L-W-W` schedules `W W L W W W L W W W L ...`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::hetnet::{GraphError, HetGraph, NodeId, NodeIndex, NodeType};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WalkError {
    #[error("metapath needs at least 2 types, got {0}")]
    TooShort(usize),
    #[error("malformed metapath {0:?}")]
    Malformed(String),
    #[error("metapath {0} is not cyclable (first and last types differ) but walk length {1} exceeds it")]
    NotCyclable(Metapath, usize),
    #[error("start node {0} has type {1}, metapath starts with {2}")]
    StartType(NodeId, NodeType, NodeType),
    #[error("graph has no nodes of the metapath's first type {0}")]
    EmptyStartSet(NodeType),
    #[error("walk count must be at least 1")]
    ZeroWalks,
    #[error("walk length must be at least 2, got {0}")]
    WalkLength(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// An ordered list of node types, at least two long.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Metapath {
    types: Vec<NodeType>,
}

impl Metapath {
    pub fn new(types: Vec<NodeType>) -> Result<Self, WalkError> {
        if types.len() < 2 {
            return Err(WalkError::TooShort(types.len()));
        }
        Ok(Self { types })
    }

    /// `W-W-L-W-W`: words that co-occur at the same location.
    pub fn word_location() -> Self {
        use NodeType::*;
        Self { types: alloc::vec![W, W, L, W, W] }
    }

    /// `W-W-L-T-L-W-W`: words linked through locations that share a time.
    pub fn word_location_time() -> Self {
        use NodeType::*;
        Self { types: alloc::vec![W, W, L, T, L, W, W] }
    }

    pub fn types(&self) -> &[NodeType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> NodeType {
        self.types[0]
    }

    pub fn is_cyclable(&self) -> bool {
        self.types.first() == self.types.last()
    }

    /// Type expected at walk position `i`, or `None` past the end of a
    /// non-cyclable metapath.
    pub fn type_at(&self, i: usize) -> Option<NodeType> {
        let k = self.types.len();
        if i < k {
            Some(self.types[i])
        } else if self.is_cyclable() {
            Some(self.types[i % (k - 1)])
        } else {
            None
        }
    }

    fn check_length(&self, length: usize) -> Result<(), WalkError> {
        if length > self.types.len() && !self.is_cyclable() {
            return Err(WalkError::NotCyclable(self.clone(), length));
        }
        Ok(())
    }
}

impl fmt::Display for Metapath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.types.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for Metapath {
    type Err = WalkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let types = s
            .trim()
            .split('-')
            .map(|t| t.trim().parse::<NodeType>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| WalkError::Malformed(s.to_string()))?;
        Metapath::new(types)
    }
}

/// Successor probabilities from `u` restricted to `next_type`:
/// `weight(u, v) / sum`. Empty at a dead end.
pub fn transition_distribution(
    g: &HetGraph,
    u: NodeIndex,
    next_type: NodeType,
) -> Vec<(NodeIndex, f64)> {
    let tn = g.typed_neighbors(u, next_type);
    let total = tn.total_weight() as f64;
    tn.targets
        .iter()
        .zip(tn.weights)
        .map(|(&v, &w)| (v, w as f64 / total))
        .collect()
}

/// [`transition_distribution`] keyed by node id.
pub fn transition_distribution_of(
    g: &HetGraph,
    u: &NodeId,
    next_type: NodeType,
) -> Result<BTreeMap<NodeId, f64>, GraphError> {
    let ui = g.index_of(u)?;
    Ok(transition_distribution(g, ui, next_type)
        .into_iter()
        .map(|(v, p)| (g.node(v).clone(), p))
        .collect())
}

/// Samples one successor of type `next_type`, or `None` at a dead end.
pub fn step<R: Rng + ?Sized>(
    g: &HetGraph,
    u: NodeIndex,
    next_type: NodeType,
    rng: &mut R,
) -> Option<NodeIndex> {
    let tn = g.typed_neighbors(u, next_type);
    let total = tn.total_weight();
    if total == 0 {
        return None;
    }
    Some(tn.pick(rng.random_range(0..total)))
}

/// One walk of up to `length` nodes. Stops early at a dead end; the result
/// always holds at least the start node.
pub fn walk<R: Rng + ?Sized>(
    g: &HetGraph,
    mp: &Metapath,
    start: NodeIndex,
    length: usize,
    rng: &mut R,
) -> Result<Vec<NodeIndex>, WalkError> {
    mp.check_length(length)?;
    let start_type = g.node_type(start);
    if start_type != mp.first() {
        return Err(WalkError::StartType(g.node(start).clone(), start_type, mp.first()));
    }
    let mut path = Vec::with_capacity(length);
    path.push(start);
    let mut cur = start;
    for i in 1..length {
        let next_type = mp.type_at(i).expect("length checked against metapath");
        match step(g, cur, next_type, rng) {
            Some(v) => {
                path.push(v);
                cur = v;
            }
            None => break,
        }
    }
    Ok(path)
}

/// [`walk`] from a node id.
pub fn walk_from<R: Rng + ?Sized>(
    g: &HetGraph,
    mp: &Metapath,
    start: &NodeId,
    length: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>, WalkError> {
    let s = g.index_of(start)?;
    Ok(walk(g, mp, s, length, rng)?
        .into_iter()
        .map(|i| g.node(i).clone())
        .collect())
}

/// Walk generation parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkConfig {
    pub metapath: Metapath,
    pub num_walks: usize,
    pub walk_length: usize,
    pub seed: u64,
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        if self.num_walks == 0 {
            return Err(WalkError::ZeroWalks);
        }
        if self.walk_length < 2 {
            return Err(WalkError::WalkLength(self.walk_length));
        }
        self.metapath.check_length(self.walk_length)
    }
}

/// The `num_walks` walks rooted at one start node. Each walk draws from its
/// own generator keyed by `(seed, start, walk index)`, so the result does not
/// depend on how start nodes are spread over workers.
pub fn walks_from_start(g: &HetGraph, cfg: &WalkConfig, start: NodeIndex) -> Result<Vec<Vec<NodeIndex>>, WalkError> {
    (0..cfg.num_walks)
        .map(|w| {
            let mut r = rng::stream(cfg.seed, &[start as u64, w as u64]);
            walk(g, &cfg.metapath, start, cfg.walk_length, &mut r)
        })
        .collect()
}

/// Start nodes: every node of the metapath's first type.
pub fn start_nodes(g: &HetGraph, mp: &Metapath) -> Result<core::ops::Range<NodeIndex>, WalkError> {
    let r = g.nodes_of_type(mp.first());
    if r.is_empty() {
        return Err(WalkError::EmptyStartSet(mp.first()));
    }
    Ok(r)
}

/// Walk sentences over their own compact node list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WalkCorpus {
    nodes: Vec<NodeId>,
    walks: Vec<Vec<u32>>,
}

/// Bookkeeping from [`generate_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WalkStats {
    pub attempted: usize,
    pub truncated: usize,
    /// Single-node walks dropped from the corpus.
    pub discarded: usize,
}

impl WalkCorpus {
    /// Interns walks given as node ids. Single-node walks are kept as given.
    pub fn from_walks<I, W>(walks: I) -> Self
    where
        I: IntoIterator<Item = W>,
        W: IntoIterator<Item = NodeId>,
    {
        let raw: Vec<Vec<NodeId>> = walks.into_iter().map(|w| w.into_iter().collect()).collect();
        let mut index: BTreeMap<&NodeId, u32> = BTreeMap::new();
        for w in &raw {
            for n in w {
                index.insert(n, 0);
            }
        }
        let mut nodes = Vec::with_capacity(index.len());
        for (i, (n, slot)) in index.iter_mut().enumerate() {
            *slot = i as u32;
            nodes.push((*n).clone());
        }
        let walks = raw
            .iter()
            .map(|w| w.iter().map(|n| index[n]).collect())
            .collect();
        Self { nodes, walks }
    }

    /// Interns graph-indexed walks, keeping the graph's node order.
    pub fn from_graph_walks(g: &HetGraph, walks: Vec<Vec<NodeIndex>>) -> Self {
        let mut used = alloc::vec![u32::MAX; g.node_count()];
        for w in &walks {
            for &v in w {
                used[v as usize] = 0;
            }
        }
        let mut nodes = Vec::new();
        for (i, slot) in used.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = nodes.len() as u32;
                nodes.push(g.node(i as NodeIndex).clone());
            }
        }
        let walks = walks
            .into_iter()
            .map(|w| w.into_iter().map(|v| used[v as usize]).collect())
            .collect();
        Self { nodes, walks }
    }

    /// Nodes in [`NodeId`] order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, i: u32) -> &NodeId {
        &self.nodes[i as usize]
    }

    pub fn walks(&self) -> &[Vec<u32>] {
        &self.walks
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    /// Occurrence count of every node across all walks.
    pub fn frequencies(&self) -> Vec<u64> {
        let mut f = alloc::vec![0u64; self.nodes.len()];
        for w in &self.walks {
            for &v in w {
                f[v as usize] += 1;
            }
        }
        f
    }

    pub fn walk_ids(&self, i: usize) -> impl Iterator<Item = &NodeId> {
        self.walks[i].iter().map(|&v| &self.nodes[v as usize])
    }
}

/// Collects walks from start-node batches (in start order), dropping
/// single-node walks.
pub fn assemble_corpus(
    g: &HetGraph,
    cfg: &WalkConfig,
    batches: impl IntoIterator<Item = Vec<Vec<NodeIndex>>>,
) -> (WalkCorpus, WalkStats) {
    let mut stats = WalkStats::default();
    let mut kept = Vec::new();
    for batch in batches {
        for w in batch {
            stats.attempted += 1;
            if w.len() < cfg.walk_length {
                stats.truncated += 1;
            }
            if w.len() < 2 {
                stats.discarded += 1;
            } else {
                kept.push(w);
            }
        }
    }
    (WalkCorpus::from_graph_walks(g, kept), stats)
}

/// `num_walks` walks from every node of the metapath's first type.
pub fn generate_corpus(g: &HetGraph, cfg: &WalkConfig) -> Result<(WalkCorpus, WalkStats), WalkError> {
    cfg.validate()?;
    let starts = start_nodes(g, &cfg.metapath)?;
    let batches = starts
        .map(|s| walks_from_start(g, cfg, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_corpus(g, cfg, batches))
}
