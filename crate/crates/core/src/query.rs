//! Query resolution, cosine nearest neighbours and MRR evaluation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::cluster::ClusterModel;
use crate::embed::Embeddings;
use crate::hetnet::{ClusteredRecord, NodeId, NodeType};
use crate::ingest::{GeoPoint, Record, Vocabulary};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("word {0:?} is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("node {0} has no trained vector")]
    Untrained(NodeId),
    #[error("query vector of {0} has zero norm")]
    Degenerate(NodeId),
    #[error("cluster model has no modes")]
    EmptyModel,
    #[error("expected a {expected} cluster model")]
    WrongModel { expected: &'static str },
    #[error("evaluation set has no usable queries")]
    EmptyEvalSet,
}

/// A raw user query in exactly one modality.
#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Word(String),
    Time(i64),
    Location(GeoPoint),
}

/// Maps a query onto a trained node.
pub fn resolve(
    q: &Query,
    time_model: &ClusterModel,
    space_model: &ClusterModel,
    vocab: &Vocabulary,
    emb: &Embeddings,
) -> Result<NodeId, QueryError> {
    let node = match q {
        Query::Word(w) => {
            let w = w.to_lowercase();
            if !vocab.contains(&w) {
                return Err(QueryError::OutOfVocabulary(w));
            }
            NodeId::Word(w)
        }
        Query::Time(ts) => {
            if time_model.is_empty() {
                return Err(QueryError::EmptyModel);
            }
            let idx = time_model
                .assign_timestamp(*ts)
                .ok_or(QueryError::WrongModel { expected: "time" })?;
            NodeId::Time(idx as u32)
        }
        Query::Location(p) => {
            if space_model.is_empty() {
                return Err(QueryError::EmptyModel);
            }
            let idx = space_model
                .assign_location(*p)
                .ok_or(QueryError::WrongModel { expected: "space" })?;
            NodeId::Location(idx as u32)
        }
    };
    if !emb.contains(&node) {
        return Err(QueryError::Untrained(node));
    }
    Ok(node)
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Cosine similarity; zero when either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

fn rank_order(a: &(NodeId, f64), b: &(NodeId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Every node of type `t` other than `u`, by descending cosine
/// similarity, ties by ascending node key.
pub fn ranking(emb: &Embeddings, u: &NodeId, t: NodeType) -> Result<Vec<(NodeId, f64)>, QueryError> {
    let qv = emb.vector(u).ok_or_else(|| QueryError::Untrained(u.clone()))?;
    let qn = norm(qv);
    if qn == 0.0 {
        return Err(QueryError::Degenerate(u.clone()));
    }
    let mut scored: Vec<(NodeId, f64)> = emb
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.node_type() == t && *n != u)
        .map(|(i, n)| (n.clone(), cosine(qv, emb.row(i as u32))))
        .collect();
    scored.sort_by(rank_order);
    Ok(scored)
}

/// The top `k` of [`ranking`].
pub fn nearest(
    emb: &Embeddings,
    u: &NodeId,
    t: NodeType,
    k: usize,
) -> Result<Vec<(NodeId, f64)>, QueryError> {
    let mut r = ranking(emb, u, t)?;
    r.truncate(k);
    Ok(r)
}

/// Top-k lists for every node type.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedResults {
    pub query: NodeId,
    pub per_type: BTreeMap<NodeType, Vec<(NodeId, f64)>>,
}

pub fn ranked_results(emb: &Embeddings, u: &NodeId, k: usize) -> Result<RankedResults, QueryError> {
    let mut per_type = BTreeMap::new();
    for t in NodeType::ALL {
        per_type.insert(t, nearest(emb, u, t, k)?);
    }
    Ok(RankedResults { query: u.clone(), per_type })
}

/// `1 / position` (1-based) of `truth`, or 0 if absent.
pub fn reciprocal_rank(results: &[(NodeId, f64)], truth: &NodeId) -> f64 {
    results
        .iter()
        .position(|(n, _)| n == truth)
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

/// Mean of `1 / r_i`.
pub fn mean_reciprocal_rank(ranks: &[usize]) -> Option<f64> {
    if ranks.is_empty() {
        return None;
    }
    Some(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// One ground-truth query: retrieve `truth` (of type `target`) for `query`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EvalItem {
    pub query: NodeId,
    pub truth: NodeId,
    pub target: NodeType,
}

impl EvalItem {
    pub fn new(query: NodeId, truth: NodeId) -> Self {
        let target = truth.node_type();
        Self { query, truth, target }
    }
}

/// Ground-truth queries; duplicates are kept and count with multiplicity.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvalSet {
    pub items: Vec<EvalItem>,
}

impl EvalSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Query / truth pairs from one held-out record: every keyword against
    /// the record's location cluster and against each co-occurring keyword.
    pub fn push_record(&mut self, r: &ClusteredRecord) {
        for (i, a) in r.keywords.iter().enumerate() {
            let qa = NodeId::Word(a.clone());
            self.items.push(EvalItem::new(qa.clone(), NodeId::Location(r.location)));
            for (j, b) in r.keywords.iter().enumerate() {
                if i != j {
                    self.items.push(EvalItem::new(qa.clone(), NodeId::Word(b.clone())));
                }
            }
        }
    }
}

/// Builds an evaluation set from held-out, vocabulary-restricted records.
pub fn build_eval_set<'a>(
    records: impl IntoIterator<Item = &'a Record>,
    time_model: &ClusterModel,
    space_model: &ClusterModel,
) -> EvalSet {
    let mut set = EvalSet::default();
    for r in records {
        set.push_record(&ClusteredRecord::from_record(r, time_model, space_model));
    }
    set
}

/// Sum and count of reciprocal ranks for one target type.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MrrBucket {
    pub sum: f64,
    pub count: usize,
}

impl MrrBucket {
    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MrrReport {
    pub overall: MrrBucket,
    pub per_type: BTreeMap<NodeType, MrrBucket>,
    /// Items whose query or truth node has no vector.
    pub skipped: usize,
}

impl MrrReport {
    pub fn mrr(&self) -> f64 {
        self.overall.mean().unwrap_or(0.0)
    }

    pub fn type_mrr(&self, t: NodeType) -> Option<f64> {
        self.per_type.get(&t).and_then(MrrBucket::mean)
    }
}

/// MRR over the set. `cutoff = None` ranks the whole type population, so
/// every retrievable truth has a finite rank.
pub fn mrr(set: &EvalSet, emb: &Embeddings, cutoff: Option<usize>) -> Result<MrrReport, QueryError> {
    let mut report = MrrReport::default();
    let mut cache: BTreeMap<(NodeId, NodeType), Vec<(NodeId, f64)>> = BTreeMap::new();
    for item in &set.items {
        if !emb.contains(&item.query) || !emb.contains(&item.truth) {
            report.skipped += 1;
            continue;
        }
        let key = (item.query.clone(), item.target);
        if !cache.contains_key(&key) {
            let mut r = ranking(emb, &item.query, item.target)?;
            if let Some(k) = cutoff {
                r.truncate(k);
            }
            cache.insert(key.clone(), r);
        }
        let rr = reciprocal_rank(&cache[&key], &item.truth);
        report.overall.sum += rr;
        report.overall.count += 1;
        let b = report.per_type.entry(item.target).or_default();
        b.sum += rr;
        b.count += 1;
    }
    if report.overall.count == 0 {
        return Err(QueryError::EmptyEvalSet);
    }
    Ok(report)
}
