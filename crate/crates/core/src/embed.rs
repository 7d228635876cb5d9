//! Type-aware skip-gram with heterogeneous negative sampling.
//!
//! Each node owns an input vector `X_v` and an output (context) vector
//! `X'_v`. For a centre `v` and context `c` of type `t` with negatives
//! `u_1..u_M` drawn from type `t` only, the per-pair objective is
//!
//! ```text
//! O = log σ(X'_c · X_v) + Σ_m log σ(-X'_{u_m} · X_v)
//! ```
//!
//! and training ascends it by SGD. The input bank is the published
//! embedding.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(target_has_atomic = "64")]
use core::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::hetnet::{NodeId, NodeType};
use crate::rng;
use crate::walker::WalkCorpus;

/// Negative draws that keep hitting the true context give up after this
/// many tries.
pub const MAX_RESAMPLE: usize = 100;

/// Exponent applied to corpus frequencies in the negative distribution.
pub const UNIGRAM_POWER: f64 = 0.75;

const INIT_STREAM: u64 = 0x1417;
const TRAIN_STREAM: u64 = 0x7A11;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("invalid training config: {0}")]
    Config(&'static str),
    #[error("walk corpus is empty")]
    EmptyCorpus,
    #[error("vector data has {got} values, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("non-finite component in vector of {0}")]
    NonFinite(NodeId),
    #[error("duplicate node {0}")]
    Duplicate(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            window: 7,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::Config("dim must be at least 1"));
        }
        if self.window == 0 {
            return Err(EmbedError::Config("window must be at least 1"));
        }
        if self.negatives == 0 {
            return Err(EmbedError::Config("negatives must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(EmbedError::Config("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EmbedError::Config("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Logistic function, stable for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `log σ(x)` without overflow.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -libm::log1p(libm::exp(-x))
    } else {
        x - libm::log1p(libm::exp(x))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Read/update access to the two parameter banks.
pub trait ParamBanks {
    fn dim(&self) -> usize;
    fn read_input(&self, node: u32, out: &mut [f64]);
    fn read_output(&self, node: u32, out: &mut [f64]);
    fn add_input(&mut self, node: u32, delta: &[f64]);
    fn add_output(&mut self, node: u32, delta: &[f64]);
}

/// Input and output vectors for every node of a walk corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    nodes: Vec<NodeId>,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl EmbeddingTable {
    /// Input components i.i.d. uniform in `[-0.5/d, 0.5/d)`, outputs zero.
    pub fn init(nodes: Vec<NodeId>, dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::Config("dim must be at least 1"));
        }
        let mut r = rng::stream(seed, &[INIT_STREAM]);
        let scale = 1.0 / dim as f64;
        let input = (0..nodes.len() * dim)
            .map(|_| (r.random::<f64>() - 0.5) * scale)
            .collect();
        let output = vec![0.0; nodes.len() * dim];
        Ok(Self { dim, nodes, input, output })
    }

    /// Builds from explicit banks (row-major, one row per node).
    pub fn from_banks(
        nodes: Vec<NodeId>,
        dim: usize,
        input: Vec<f64>,
        output: Vec<f64>,
    ) -> Result<Self, EmbedError> {
        let expected = nodes.len() * dim;
        for bank in [&input, &output] {
            if bank.len() != expected {
                return Err(EmbedError::Shape { got: bank.len(), expected });
            }
        }
        Ok(Self { dim, nodes, input, output })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&self, i: u32) -> &[f64] {
        let d = self.dim;
        &self.input[i as usize * d..(i as usize + 1) * d]
    }

    pub fn output(&self, i: u32) -> &[f64] {
        let d = self.dim;
        &self.output[i as usize * d..(i as usize + 1) * d]
    }

    pub fn input_mut(&mut self, i: u32) -> &mut [f64] {
        let d = self.dim;
        &mut self.input[i as usize * d..(i as usize + 1) * d]
    }

    pub fn output_mut(&mut self, i: u32) -> &mut [f64] {
        let d = self.dim;
        &mut self.output[i as usize * d..(i as usize + 1) * d]
    }

    pub fn input_bank(&self) -> &[f64] {
        &self.input
    }

    pub fn output_bank(&self) -> &[f64] {
        &self.output
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    /// The input bank as a queryable embedding.
    pub fn to_embeddings(&self) -> Embeddings {
        Embeddings::new(self.nodes.clone(), self.dim, self.input.clone())
            .expect("table rows are consistent")
    }
}

impl ParamBanks for EmbeddingTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn read_input(&self, node: u32, out: &mut [f64]) {
        out.copy_from_slice(self.input(node));
    }

    fn read_output(&self, node: u32, out: &mut [f64]) {
        out.copy_from_slice(self.output(node));
    }

    fn add_input(&mut self, node: u32, delta: &[f64]) {
        for (x, d) in self.input_mut(node).iter_mut().zip(delta) {
            *x += d;
        }
    }

    fn add_output(&mut self, node: u32, delta: &[f64]) {
        for (x, d) in self.output_mut(node).iter_mut().zip(delta) {
            *x += d;
        }
    }
}

/// Parameter banks shared between training threads without locking.
/// Components are `f64` bit patterns; concurrent updates to the same
/// component may be lost.
#[cfg(target_has_atomic = "64")]
#[derive(Debug)]
pub struct SharedBanks {
    dim: usize,
    nodes: Vec<NodeId>,
    input: Vec<AtomicU64>,
    output: Vec<AtomicU64>,
}

#[cfg(target_has_atomic = "64")]
impl SharedBanks {
    pub fn from_table(table: EmbeddingTable) -> Self {
        let wrap = |v: Vec<f64>| v.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect();
        Self {
            dim: table.dim,
            nodes: table.nodes,
            input: wrap(table.input),
            output: wrap(table.output),
        }
    }

    pub fn into_table(self) -> EmbeddingTable {
        let unwrap = |v: Vec<AtomicU64>| v.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
        EmbeddingTable {
            dim: self.dim,
            nodes: self.nodes,
            input: unwrap(self.input),
            output: unwrap(self.output),
        }
    }

    /// A cheap per-thread handle implementing [`ParamBanks`].
    pub fn handle(&self) -> SharedHandle<'_> {
        SharedHandle(self)
    }
}

#[cfg(target_has_atomic = "64")]
#[derive(Debug, Clone, Copy)]
pub struct SharedHandle<'a>(&'a SharedBanks);

#[cfg(target_has_atomic = "64")]
impl SharedHandle<'_> {
    fn read(bank: &[AtomicU64], dim: usize, node: u32, out: &mut [f64]) {
        let row = &bank[node as usize * dim..(node as usize + 1) * dim];
        for (o, a) in out.iter_mut().zip(row) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn add(bank: &[AtomicU64], dim: usize, node: u32, delta: &[f64]) {
        let row = &bank[node as usize * dim..(node as usize + 1) * dim];
        for (a, d) in row.iter().zip(delta) {
            let cur = f64::from_bits(a.load(Ordering::Relaxed));
            a.store((cur + d).to_bits(), Ordering::Relaxed);
        }
    }
}

#[cfg(target_has_atomic = "64")]
impl ParamBanks for SharedHandle<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn read_input(&self, node: u32, out: &mut [f64]) {
        Self::read(&self.0.input, self.0.dim, node, out)
    }

    fn read_output(&self, node: u32, out: &mut [f64]) {
        Self::read(&self.0.output, self.0.dim, node, out)
    }

    fn add_input(&mut self, node: u32, delta: &[f64]) {
        Self::add(&self.0.input, self.0.dim, node, delta)
    }

    fn add_output(&mut self, node: u32, delta: &[f64]) {
        Self::add(&self.0.output, self.0.dim, node, delta)
    }
}

/// Every `(centre, context)` pair with `0 < |i - j| <= window`.
pub fn skipgram_pairs<T: Copy>(walk: &[T], window: usize) -> Vec<(T, T)> {
    let mut pairs = Vec::new();
    for i in 0..walk.len() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(walk.len().saturating_sub(1));
        for j in lo..=hi {
            if j != i {
                pairs.push((walk[i], walk[j]));
            }
        }
    }
    pairs
}

/// Number of pairs [`skipgram_pairs`] yields for a walk of length `n`.
pub fn skipgram_pair_count(n: usize, window: usize) -> u64 {
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(n.saturating_sub(1));
            (hi - lo) as u64
        })
        .sum()
}

/// `p(c | v)` normalised over `candidates` (the nodes of `c`'s type).
pub fn type_softmax_prob(table: &EmbeddingTable, v: u32, c: u32, candidates: &[u32]) -> f64 {
    let xv = table.input(v);
    let scores: Vec<f64> = candidates.iter().map(|&u| dot(table.output(u), xv)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = scores.iter().map(|s| libm::exp(s - max)).sum();
    libm::exp(dot(table.output(c), xv) - max) / denom
}

/// The negative-sampling objective for one pair.
pub fn pair_objective(table: &EmbeddingTable, v: u32, c: u32, negatives: &[u32]) -> f64 {
    let xv = table.input(v);
    log_sigmoid(dot(table.output(c), xv))
        + negatives
            .iter()
            .map(|&u| log_sigmoid(-dot(table.output(u), xv)))
            .sum::<f64>()
}

/// Analytic gradient of [`pair_objective`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    /// With respect to `X_v`.
    pub input: Vec<f64>,
    /// With respect to each distinct `X'_u`, ascending by node.
    pub outputs: BTreeMap<u32, Vec<f64>>,
}

pub fn pair_gradient(table: &EmbeddingTable, v: u32, c: u32, negatives: &[u32]) -> PairGradient {
    let d = table.dim;
    let xv = table.input(v);
    let mut input = vec![0.0; d];
    let mut outputs: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let labelled = core::iter::once((c, 1.0)).chain(negatives.iter().map(|&u| (u, 0.0)));
    for (u, label) in labelled {
        let xu = table.output(u);
        let coef = label - sigmoid(dot(xu, xv));
        for (g, x) in input.iter_mut().zip(xu) {
            *g += coef * x;
        }
        let go = outputs.entry(u).or_insert_with(|| vec![0.0; d]);
        for (g, x) in go.iter_mut().zip(xv) {
            *g += coef * x;
        }
    }
    PairGradient { input, outputs }
}

/// Reusable buffers for [`sgd_update`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    center: Vec<f64>,
    rows: Vec<f64>,
    grad: Vec<f64>,
    coefs: Vec<f64>,
}

/// One ascent step on the pair objective; every coefficient is computed from
/// the pre-step parameters. Returns the objective before the step.
pub fn sgd_update<B: ParamBanks + ?Sized>(
    banks: &mut B,
    v: u32,
    c: u32,
    negatives: &[u32],
    lr: f64,
    scratch: &mut Scratch,
) -> f64 {
    let d = banks.dim();
    let k = negatives.len() + 1;
    scratch.center.resize(d, 0.0);
    scratch.rows.resize(k * d, 0.0);
    scratch.grad.clear();
    scratch.grad.resize(d, 0.0);
    scratch.coefs.resize(k, 0.0);
    banks.read_input(v, &mut scratch.center);
    let mut objective = 0.0;
    for slot in 0..k {
        let (u, label, sign) = if slot == 0 { (c, 1.0, 1.0) } else { (negatives[slot - 1], 0.0, -1.0) };
        let row = &mut scratch.rows[slot * d..(slot + 1) * d];
        banks.read_output(u, row);
        let s = dot(row, &scratch.center);
        objective += log_sigmoid(sign * s);
        let coef = lr * (label - sigmoid(s));
        scratch.coefs[slot] = coef;
        for (g, x) in scratch.grad.iter_mut().zip(row.iter()) {
            *g += coef * x;
        }
    }
    for slot in 0..k {
        let u = if slot == 0 { c } else { negatives[slot - 1] };
        let coef = scratch.coefs[slot];
        let row = &mut scratch.rows[slot * d..(slot + 1) * d];
        for (r, x) in row.iter_mut().zip(&scratch.center) {
            *r = coef * x;
        }
        banks.add_output(u, row);
    }
    banks.add_input(v, &scratch.grad);
    objective
}

/// [`sgd_update`] on a table with fresh buffers.
pub fn sgd_step(table: &mut EmbeddingTable, v: u32, c: u32, negatives: &[u32], lr: f64) -> f64 {
    sgd_update(table, v, c, negatives, lr, &mut Scratch::default())
}

/// Per-type negative distribution, `P(u) ∝ freq(u)^0.75`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSampler {
    /// Per type: member nodes and their inclusive cumulative probabilities.
    tables: [(Vec<u32>, Vec<f64>); 3],
}

impl NegativeSampler {
    /// `types[i]` and `freqs[i]` describe corpus node `i`. Nodes with zero
    /// frequency are never drawn.
    pub fn new(types: &[NodeType], freqs: &[u64]) -> Self {
        let mut tables: [(Vec<u32>, Vec<f64>); 3] = Default::default();
        for (i, (t, &f)) in types.iter().zip(freqs).enumerate() {
            if f == 0 {
                continue;
            }
            let (nodes, weights) = &mut tables[*t as usize];
            nodes.push(i as u32);
            weights.push(libm::pow(f as f64, UNIGRAM_POWER));
        }
        for (_, w) in tables.iter_mut() {
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            for x in w.iter_mut() {
                acc += *x;
                *x = acc / total;
            }
            if let Some(last) = w.last_mut() {
                *last = 1.0;
            }
        }
        Self { tables }
    }

    pub fn from_corpus(corpus: &WalkCorpus) -> Self {
        let types: Vec<NodeType> = corpus.nodes().iter().map(NodeId::node_type).collect();
        Self::new(&types, &corpus.frequencies())
    }

    pub fn population(&self, t: NodeType) -> usize {
        self.tables[t as usize].0.len()
    }

    /// Probability of drawing `node` when sampling type `t`.
    pub fn probability(&self, t: NodeType, node: u32) -> f64 {
        let (nodes, cum) = &self.tables[t as usize];
        match nodes.iter().position(|&n| n == node) {
            Some(0) => cum[0],
            Some(i) => cum[i] - cum[i - 1],
            None => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, t: NodeType, rng: &mut R) -> Option<u32> {
        let (nodes, cum) = &self.tables[t as usize];
        if nodes.is_empty() {
            return None;
        }
        let r: f64 = rng.random();
        let i = cum.partition_point(|&c| c <= r).min(nodes.len() - 1);
        Some(nodes[i])
    }

    /// Draws up to `m` negatives of type `t`, resampling collisions with
    /// `exclude`. Appends to `out`.
    pub fn sample_negatives<R: Rng + ?Sized>(
        &self,
        t: NodeType,
        exclude: u32,
        m: usize,
        rng: &mut R,
        out: &mut Vec<u32>,
    ) {
        let (nodes, _) = &self.tables[t as usize];
        if nodes.is_empty() || (nodes.len() == 1 && nodes[0] == exclude) {
            return;
        }
        for _ in 0..m {
            for _ in 0..MAX_RESAMPLE {
                match self.sample(t, rng) {
                    Some(u) if u != exclude => {
                        out.push(u);
                        break;
                    }
                    _ => {}
                }
            }
        }
    }
}

/// Linear decay from `initial` to `initial / 100` over `total_pairs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub total_pairs: u64,
}

impl LrSchedule {
    pub fn at(&self, processed: u64) -> f64 {
        let floor = self.initial / 100.0;
        if self.total_pairs == 0 {
            return self.initial;
        }
        let progress = (processed as f64 / self.total_pairs as f64).min(1.0);
        (self.initial - (self.initial - floor) * progress).max(floor)
    }
}

/// Per-worker training state: negative buffer, scratch space and a view of
/// node types.
#[derive(Debug)]
pub struct WalkTrainer<'a> {
    sampler: &'a NegativeSampler,
    types: &'a [NodeType],
    window: usize,
    negatives: usize,
    schedule: LrSchedule,
    negs: Vec<u32>,
    scratch: Scratch,
}

impl<'a> WalkTrainer<'a> {
    pub fn new(
        sampler: &'a NegativeSampler,
        types: &'a [NodeType],
        cfg: &TrainConfig,
        schedule: LrSchedule,
    ) -> Self {
        Self {
            sampler,
            types,
            window: cfg.window,
            negatives: cfg.negatives,
            schedule,
            negs: Vec::with_capacity(cfg.negatives),
            scratch: Scratch::default(),
        }
    }

    /// Trains on every skip-gram pair of one walk. `processed` is the global
    /// pair count before this walk; returns the number of pairs trained.
    pub fn train_walk<B: ParamBanks + ?Sized, R: Rng + ?Sized>(
        &mut self,
        banks: &mut B,
        walk: &[u32],
        processed: u64,
        rng: &mut R,
    ) -> u64 {
        let n = walk.len();
        let mut count = 0u64;
        for i in 0..n {
            let lo = i.saturating_sub(self.window);
            let hi = (i + self.window).min(n - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let (v, c) = (walk[i], walk[j]);
                let t = self.types[c as usize];
                self.negs.clear();
                self.sampler.sample_negatives(t, c, self.negatives, rng, &mut self.negs);
                debug_assert!(self.negs.iter().all(|&u| self.types[u as usize] == t && u != c));
                let lr = self.schedule.at(processed + count);
                sgd_update(banks, v, c, &self.negs, lr, &mut self.scratch);
                count += 1;
            }
        }
        count
    }
}

/// Total pairs one epoch over `corpus` yields.
pub fn epoch_pairs(corpus: &WalkCorpus, window: usize) -> u64 {
    corpus.walks().iter().map(|w| skipgram_pair_count(w.len(), window)).sum()
}

/// Deterministic single-worker trainer, stepped one epoch at a time.
#[derive(Debug)]
pub struct Trainer<'c> {
    corpus: &'c WalkCorpus,
    cfg: TrainConfig,
    types: Vec<NodeType>,
    sampler: NegativeSampler,
    table: EmbeddingTable,
    schedule: LrSchedule,
    processed: u64,
    epoch: usize,
    rng: rng::PipelineRng,
}

impl<'c> Trainer<'c> {
    pub fn new(corpus: &'c WalkCorpus, cfg: TrainConfig) -> Result<Self, EmbedError> {
        cfg.validate()?;
        if corpus.is_empty() {
            return Err(EmbedError::EmptyCorpus);
        }
        let table = EmbeddingTable::init(corpus.nodes().to_vec(), cfg.dim, cfg.seed)?;
        let schedule = LrSchedule {
            initial: cfg.learning_rate,
            total_pairs: epoch_pairs(corpus, cfg.window) * cfg.epochs as u64,
        };
        Ok(Self {
            corpus,
            cfg,
            types: corpus.nodes().iter().map(NodeId::node_type).collect(),
            sampler: NegativeSampler::from_corpus(corpus),
            table,
            schedule,
            processed: 0,
            epoch: 0,
            rng: rng::stream(cfg.seed, &[TRAIN_STREAM]),
        })
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn sampler(&self) -> &NegativeSampler {
        &self.sampler
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.cfg.epochs
    }

    pub fn run_epoch(&mut self) {
        let mut worker = WalkTrainer::new(&self.sampler, &self.types, &self.cfg, self.schedule);
        for walk in self.corpus.walks() {
            self.processed += worker.train_walk(&mut self.table, walk, self.processed, &mut self.rng);
        }
        self.epoch += 1;
    }

    pub fn finish(self) -> EmbeddingTable {
        self.table
    }
}

/// Trains for `cfg.epochs` epochs on one worker.
pub fn train(corpus: &WalkCorpus, cfg: TrainConfig) -> Result<EmbeddingTable, EmbedError> {
    let mut t = Trainer::new(corpus, cfg)?;
    while !t.is_done() {
        t.run_epoch();
    }
    Ok(t.finish())
}

/// Query-time vectors: one row per node, looked up by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    dim: usize,
    nodes: Vec<NodeId>,
    index: BTreeMap<NodeId, u32>,
    vectors: Vec<f64>,
}

impl Embeddings {
    pub fn new(nodes: Vec<NodeId>, dim: usize, vectors: Vec<f64>) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::Config("dim must be at least 1"));
        }
        let expected = nodes.len() * dim;
        if vectors.len() != expected {
            return Err(EmbedError::Shape { got: vectors.len(), expected });
        }
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if !vectors[i * dim..(i + 1) * dim].iter().all(|x| x.is_finite()) {
                return Err(EmbedError::NonFinite(n.clone()));
            }
            if index.insert(n.clone(), i as u32).is_some() {
                return Err(EmbedError::Duplicate(n.clone()));
            }
        }
        Ok(Self { dim, nodes, index, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn row(&self, i: u32) -> &[f64] {
        &self.vectors[i as usize * self.dim..(i as usize + 1) * self.dim]
    }

    pub fn index_of(&self, node: &NodeId) -> Option<u32> {
        self.index.get(node).copied()
    }

    pub fn vector(&self, node: &NodeId) -> Option<&[f64]> {
        self.index_of(node).map(|i| self.row(i))
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.index.contains_key(node)
    }

    /// Multiplies one stored vector by `factor`.
    pub fn scale_row(&mut self, i: u32, factor: f64) {
        let d = self.dim;
        for x in &mut self.vectors[i as usize * d..(i as usize + 1) * d] {
            *x *= factor;
        }
    }
}
