//! Thread-parallel versions of the clustering, walk and training loops.
//!
//! Clustering and walks give the same output for any worker count. Training
//! with more than one worker runs lock-free over shared banks and is only
//! statistically reproducible.

use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use geohin_core::cluster::{ClusterError, Clustering, KernelConfig, Modality, ModeParams, ModeSearch};
use geohin_core::embed::{
    epoch_pairs, train, EmbedError, EmbeddingTable, LrSchedule, NegativeSampler, SharedBanks, TrainConfig,
    WalkTrainer,
};
use geohin_core::hetnet::{HetGraph, NodeId, NodeType};
use geohin_core::rng;
use geohin_core::walker::{assemble_corpus, start_nodes, walks_from_start, WalkConfig, WalkCorpus, WalkError, WalkStats};

const HOGWILD_STREAM: u64 = 0x486F_6777;

/// Applies `f` to every item on up to `workers` threads, preserving order.
pub fn map_ordered<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(f).collect::<Vec<U>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Mode search with seeds climbed concurrently.
pub fn find_modes(
    points: &[f64],
    modality: Modality,
    cfg: KernelConfig,
    params: ModeParams,
    workers: usize,
) -> Result<Clustering, ClusterError> {
    let search = ModeSearch::new(points, modality, cfg, params)?;
    let seeds = search.seeds();
    let ends = map_ordered(&seeds, workers, |s| search.climb_seed(s));
    Ok(search.finish(&seeds, &ends))
}

/// Walk generation spread over start nodes.
pub fn generate_corpus(g: &HetGraph, cfg: &WalkConfig, workers: usize) -> Result<(WalkCorpus, WalkStats), WalkError> {
    cfg.validate()?;
    let starts: Vec<u32> = start_nodes(g, &cfg.metapath)?.collect();
    let batches = map_ordered(&starts, workers, |&s| walks_from_start(g, cfg, s))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_corpus(g, cfg, batches))
}

/// Skip-gram training. One worker is the deterministic trainer; more
/// workers split each epoch's walks and update shared banks without locks.
pub fn train_embeddings(corpus: &WalkCorpus, cfg: TrainConfig, workers: usize) -> Result<EmbeddingTable, EmbedError> {
    let workers = workers.clamp(1, corpus.len().max(1));
    if workers == 1 {
        return train(corpus, cfg);
    }
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let types: Vec<NodeType> = corpus.nodes().iter().map(NodeId::node_type).collect();
    let sampler = NegativeSampler::from_corpus(corpus);
    let schedule = LrSchedule {
        initial: cfg.learning_rate,
        total_pairs: epoch_pairs(corpus, cfg.window) * cfg.epochs as u64,
    };
    let shared = SharedBanks::from_table(EmbeddingTable::init(corpus.nodes().to_vec(), cfg.dim, cfg.seed)?);
    let processed = AtomicU64::new(0);
    let chunk = corpus.len().div_ceil(workers);
    for epoch in 0..cfg.epochs {
        thread::scope(|s| {
            for (w, part) in corpus.walks().chunks(chunk).enumerate() {
                let (shared, sampler, types, processed, cfg) = (&shared, &sampler, &types, &processed, &cfg);
                s.spawn(move || {
                    let mut banks = shared.handle();
                    let mut trainer = WalkTrainer::new(sampler, types, cfg, schedule);
                    let mut r = rng::stream(cfg.seed, &[HOGWILD_STREAM, epoch as u64, w as u64]);
                    for walk in part {
                        let at = processed.load(Ordering::Relaxed);
                        let n = trainer.train_walk(&mut banks, walk, at, &mut r);
                        processed.fetch_add(n, Ordering::Relaxed);
                    }
                });
            }
        });
    }
    let table = shared.into_table();
    if !table.is_finite() {
        let bad = table
            .nodes()
            .iter()
            .enumerate()
            .find(|(i, _)| !table.input(*i as u32).iter().all(|x| x.is_finite()))
            .map_or_else(|| table.nodes()[0].clone(), |(_, n)| n.clone());
        return Err(EmbedError::NonFinite(bad));
    }
    Ok(table)
}
