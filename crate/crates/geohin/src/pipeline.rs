//! Pipeline stages with file-based handoff.
//!
//! Each stage has an in-memory form working on loaded structures and a
//! `run_*` form that reads the previous stage's artifact files and writes
//! its own.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use geohin_core::cluster::{ClusterError, ClusterModel, Clustering, KernelConfig, Modality, ModeParams, TimeMapping};
use geohin_core::embed::{EmbedError, Embeddings, TrainConfig};
use geohin_core::hetnet::{build_network, ClusteredRecord, HetGraph, NodeType};
use geohin_core::ingest::{build_vocabulary, restrict_record, RawRecord, StopWords, VocabError, Vocabulary};
use geohin_core::query::{self, build_eval_set, MrrReport, QueryError};
use geohin_core::walker::{Metapath, WalkConfig, WalkCorpus, WalkError, WalkStats};

use crate::formats::{self, FormatError};
use crate::parallel;

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const TIME_CLUSTER_FILE: &str = "time_clusters.txt";
pub const SPACE_CLUSTER_FILE: &str = "space_clusters.txt";
pub const GRAPH_FILE: &str = "graph.tsv";
pub const WALKS_FILE: &str = "walks.txt";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const EVAL_FILE: &str = "eval.txt";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("{0}: no valid records")]
    NoRecords(PathBuf),
    #[error("{path}: {message}")]
    Model { path: PathBuf, message: String },
    #[error("invalid parameter: {0}")]
    Param(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Tunable parameters shared by all stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub loc_bandwidth: f64,
    pub time_bandwidth: f64,
    pub time_mapping: TimeMapping,
    pub vocab_k: usize,
    pub min_freq: u64,
    pub dim: usize,
    pub negatives: usize,
    pub window: usize,
    pub walk_length: usize,
    pub num_walks: usize,
    pub metapath: Metapath,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for Params {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            loc_bandwidth: 0.05,
            time_bandwidth: 1000.0,
            time_mapping: TimeMapping::Day,
            vocab_k: 20_000,
            min_freq: 100,
            dim: t.dim,
            negatives: t.negatives,
            window: t.window,
            walk_length: 50,
            num_walks: 30,
            metapath: Metapath::word_location(),
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            seed: t.seed,
            workers: 1,
        }
    }
}

fn positive(name: &str, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Param(format!("{name} must be positive")))
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        positive("loc_bandwidth", self.loc_bandwidth > 0.0 && self.loc_bandwidth.is_finite())?;
        positive("time_bandwidth", self.time_bandwidth > 0.0 && self.time_bandwidth.is_finite())?;
        positive("vocab_k", self.vocab_k > 0)?;
        positive("min_freq", self.min_freq > 0)?;
        positive("workers", self.workers > 0)?;
        self.walk_config().validate()?;
        self.train_config().validate()?;
        Ok(())
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            metapath: self.metapath.clone(),
            num_walks: self.num_walks,
            walk_length: self.walk_length,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }
}

// ---------------------------------------------------------------- in memory

pub fn build_vocab(records: &[RawRecord], stopwords: &StopWords, k: usize, min_freq: u64) -> Result<Vocabulary> {
    Ok(build_vocabulary(records, k, stopwords, min_freq)?)
}

/// Coordinates fed to the mode search: mapped times, or `(lat, lon)` pairs.
pub fn cluster_points(records: &[RawRecord], modality: Modality) -> Vec<f64> {
    match modality {
        Modality::Time(m) => records.iter().map(|r| m.map(r.timestamp)).collect(),
        Modality::Space => records.iter().flat_map(|r| [r.location.lat, r.location.lon]).collect(),
    }
}

pub fn cluster(records: &[RawRecord], modality: Modality, bandwidth: f64, workers: usize) -> Result<Clustering> {
    let points = cluster_points(records, modality);
    let cfg = KernelConfig::new(bandwidth, modality.dim())?;
    let c = parallel::find_modes(&points, modality, cfg, ModeParams::for_bandwidth(bandwidth), workers)?;
    if c.unconverged_seeds > 0 {
        log::warn!("{modality}: {} seeds hit the iteration cap", c.unconverged_seeds);
    }
    Ok(c)
}

fn check_model(model: &ClusterModel, path: &Path, want_time: bool) -> Result<()> {
    let is_time = matches!(model.modality, Modality::Time(_));
    let message = if is_time != want_time {
        Some(format!("expected a {} cluster model, found {}", if want_time { "time" } else { "space" }, model.modality))
    } else if model.is_empty() {
        Some("cluster model has no modes".to_string())
    } else {
        None
    };
    match message {
        Some(message) => Err(Error::Model { path: path.to_path_buf(), message }),
        None => Ok(()),
    }
}

fn clustered(records: &[RawRecord], vocab: &Vocabulary, tm: &ClusterModel, sm: &ClusterModel) -> Vec<ClusteredRecord> {
    records
        .iter()
        .map(|r| ClusteredRecord::from_record(&restrict_record(r, vocab), tm, sm))
        .collect()
}

/// Both models must be non-empty and of the right modality.
pub fn build_graph(records: &[RawRecord], vocab: &Vocabulary, tm: &ClusterModel, sm: &ClusterModel) -> Result<HetGraph> {
    check_model(tm, Path::new("time model"), true)?;
    check_model(sm, Path::new("space model"), false)?;
    Ok(build_network(&clustered(records, vocab, tm, sm)))
}

pub fn generate_walks(g: &HetGraph, params: &Params) -> Result<(WalkCorpus, WalkStats)> {
    Ok(parallel::generate_corpus(g, &params.walk_config(), params.workers)?)
}

pub fn train(corpus: &WalkCorpus, params: &Params) -> Result<Embeddings> {
    Ok(parallel::train_embeddings(corpus, params.train_config(), params.workers)?.to_embeddings())
}

/// MRR of held-out records against the trained vectors.
pub fn evaluate(
    held_out: &[RawRecord],
    vocab: &Vocabulary,
    tm: &ClusterModel,
    sm: &ClusterModel,
    emb: &Embeddings,
    cutoff: Option<usize>,
) -> Result<MrrReport> {
    check_model(tm, Path::new("time model"), true)?;
    check_model(sm, Path::new("space model"), false)?;
    let restricted: Vec<_> = held_out.iter().map(|r| restrict_record(r, vocab)).collect();
    let set = build_eval_set(&restricted, tm, sm);
    Ok(query::mrr(&set, emb, cutoff)?)
}

fn fmt_mrr(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"))
}

pub fn format_report(r: &MrrReport) -> String {
    format!(
        "text_mrr {}\nlocation_mrr {}\noverall_mrr {}\nqueries {}\nskipped {}\n",
        fmt_mrr(r.type_mrr(NodeType::W)),
        fmt_mrr(r.type_mrr(NodeType::L)),
        fmt_mrr(r.overall.mean()),
        r.overall.count,
        r.skipped
    )
}

// ---------------------------------------------------------------- file stages

fn load_stopwords(path: Option<&Path>) -> Result<StopWords> {
    Ok(match path {
        Some(p) => formats::load_stopwords(p)?,
        None => StopWords::new(),
    })
}

/// Reads a record file, failing if nothing usable is left.
pub fn load_corpus(path: &Path, stopwords: &StopWords) -> Result<Vec<RawRecord>> {
    let (records, rejects) = formats::load_records(path, stopwords)?;
    if rejects.total > 0 {
        log::warn!("{}: skipped {} malformed records {:?}", path.display(), rejects.total, rejects.by_reason);
    }
    if records.is_empty() {
        return Err(Error::NoRecords(path.to_path_buf()));
    }
    Ok(records)
}

pub fn run_vocab(corpus: &Path, stopwords: Option<&Path>, out: &Path, k: usize, min_freq: u64) -> Result<Vocabulary> {
    positive("k", k > 0)?;
    let sw = load_stopwords(stopwords)?;
    let records = load_corpus(corpus, &sw)?;
    let v = build_vocab(&records, &sw, k, min_freq)?;
    formats::save(out, &formats::vocab_to_string(&v))?;
    Ok(v)
}

pub fn run_cluster(corpus: &Path, modality: Modality, bandwidth: f64, workers: usize, out: &Path) -> Result<ClusterModel> {
    let records = load_corpus(corpus, &StopWords::new())?;
    let c = cluster(&records, modality, bandwidth, workers)?;
    formats::save(out, &formats::cluster_to_string(&c.model))?;
    Ok(c.model)
}

pub struct GraphInputs<'a> {
    pub corpus: &'a Path,
    pub stopwords: Option<&'a Path>,
    pub vocab: &'a Path,
    pub time_model: &'a Path,
    pub space_model: &'a Path,
}

fn load_models(time: &Path, space: &Path) -> Result<(ClusterModel, ClusterModel)> {
    let tm = formats::load_cluster(time)?;
    check_model(&tm, time, true)?;
    let sm = formats::load_cluster(space)?;
    check_model(&sm, space, false)?;
    Ok((tm, sm))
}

pub fn run_graph(inputs: &GraphInputs<'_>, out: &Path) -> Result<HetGraph> {
    let sw = load_stopwords(inputs.stopwords)?;
    let vocab = formats::load_vocab(inputs.vocab)?;
    let (tm, sm) = load_models(inputs.time_model, inputs.space_model)?;
    let records = load_corpus(inputs.corpus, &sw)?;
    let g = build_graph(&records, &vocab, &tm, &sm)?;
    formats::save(out, &formats::graph_to_string(&g))?;
    Ok(g)
}

pub fn run_walk(graph: &Path, params: &Params, out: &Path) -> Result<(WalkCorpus, WalkStats)> {
    let g = formats::load_graph(graph)?;
    let (c, stats) = generate_walks(&g, params)?;
    log_walk_stats(&stats);
    formats::save(out, &formats::walks_to_string(&c))?;
    Ok((c, stats))
}

fn log_walk_stats(s: &WalkStats) {
    log::info!("walks: {} attempted, {} truncated, {} discarded", s.attempted, s.truncated, s.discarded);
}

pub fn run_embed(walks: &Path, params: &Params, out: &Path) -> Result<Embeddings> {
    let c = formats::load_walks(walks)?;
    let e = train(&c, params)?;
    formats::save(out, &formats::embeddings_to_string(&e))?;
    Ok(e)
}

/// Everything a query or evaluation needs.
pub struct Model {
    pub vocab: Vocabulary,
    pub time_model: ClusterModel,
    pub space_model: ClusterModel,
    pub embeddings: Embeddings,
}

impl Model {
    pub fn load(vocab: &Path, time_model: &Path, space_model: &Path, embeddings: &Path) -> Result<Self> {
        let (tm, sm) = load_models(time_model, space_model)?;
        Ok(Self {
            vocab: formats::load_vocab(vocab)?,
            time_model: tm,
            space_model: sm,
            embeddings: formats::load_embeddings(embeddings)?,
        })
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::load(
            &dir.join(VOCAB_FILE),
            &dir.join(TIME_CLUSTER_FILE),
            &dir.join(SPACE_CLUSTER_FILE),
            &dir.join(EMBEDDINGS_FILE),
        )
    }

    pub fn evaluate(&self, held_out: &[RawRecord], cutoff: Option<usize>) -> Result<MrrReport> {
        evaluate(held_out, &self.vocab, &self.time_model, &self.space_model, &self.embeddings, cutoff)
    }

    pub fn resolve(&self, q: &query::Query) -> Result<geohin_core::NodeId> {
        Ok(query::resolve(q, &self.time_model, &self.space_model, &self.vocab, &self.embeddings)?)
    }
}

/// Inputs and outputs of a full run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Held-out records; when set an evaluation report is written too.
    pub eval_corpus: Option<PathBuf>,
    pub params: Params,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub artifacts: Vec<PathBuf>,
    pub walk_stats: WalkStats,
    pub report: Option<MrrReport>,
}

/// Runs every stage, handing off through the artifact files in `out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let p = &cfg.params;
    p.validate()?;
    let dir = &cfg.out_dir;
    let path = |name: &str| dir.join(name);
    let stopwords = cfg.stopwords.as_deref();

    run_vocab(&cfg.corpus, stopwords, &path(VOCAB_FILE), p.vocab_k, p.min_freq)?;
    run_cluster(
        &cfg.corpus,
        Modality::Time(p.time_mapping),
        p.time_bandwidth,
        p.workers,
        &path(TIME_CLUSTER_FILE),
    )?;
    run_cluster(&cfg.corpus, Modality::Space, p.loc_bandwidth, p.workers, &path(SPACE_CLUSTER_FILE))?;
    run_graph(
        &GraphInputs {
            corpus: &cfg.corpus,
            stopwords,
            vocab: &path(VOCAB_FILE),
            time_model: &path(TIME_CLUSTER_FILE),
            space_model: &path(SPACE_CLUSTER_FILE),
        },
        &path(GRAPH_FILE),
    )?;
    let (_, walk_stats) = run_walk(&path(GRAPH_FILE), p, &path(WALKS_FILE))?;
    run_embed(&path(WALKS_FILE), p, &path(EMBEDDINGS_FILE))?;

    let mut artifacts: Vec<PathBuf> = [VOCAB_FILE, TIME_CLUSTER_FILE, SPACE_CLUSTER_FILE, GRAPH_FILE, WALKS_FILE, EMBEDDINGS_FILE]
        .iter()
        .map(|n| path(n))
        .collect();
    let report = match &cfg.eval_corpus {
        Some(held_out) => {
            let sw = load_stopwords(stopwords)?;
            let records = load_corpus(held_out, &sw)?;
            let report = Model::load_dir(dir)?.evaluate(&records, None)?;
            formats::save(&path(EVAL_FILE), &format_report(&report))?;
            artifacts.push(path(EVAL_FILE));
            Some(report)
        }
        None => None,
    };
    Ok(PipelineOutput { artifacts, walk_stats, report })
}

/// Plain-text rank table, one block per node type.
pub fn format_rank_table(results: &query::RankedResults) -> String {
    let mut s = format!("query {}\n", results.query);
    for (t, rows) in results.per_type.iter().filter(|(_, r)| !r.is_empty()) {
        let _ = writeln!(s, "{t}");
        for (i, (n, score)) in rows.iter().enumerate() {
            let _ = writeln!(s, "{:>4}  {:<24} {:.6}", i + 1, n.to_string(), score);
        }
    }
    s
}
