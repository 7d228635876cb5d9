//! Core algorithms for embedding geo-tagged, time-stamped short texts into a
//! shared time / location / word vector space.
//!
//! The pipeline is:
//!
//! 1. [`ingest`]: parse records, tokenize, build a frequency-ranked vocabulary.
//! 2. [`cluster`]: mean-shift mode seeking over times and locations.
//! 3. [`hetnet`]: typed co-occurrence network over time clusters, location
//!    clusters and words.
//! 4. [`walker`]: metapath-guided weighted random walks.
//! 5. [`embed`]: type-aware skip-gram with negative sampling.
//! 6. [`query`]: cross-modal nearest neighbours and MRR scoring.
//!
//! Everything here needs only `alloc`; file formats, threads and the command
//! line live in the `geohin` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod cluster;
pub mod embed;
pub mod hetnet;
pub mod ingest;
pub mod query;
pub mod rng;
pub mod walker;

pub use cluster::{ClusterModel, Clustering, KernelConfig, Metric, Modality, TimeMapping};
pub use embed::{EmbeddingTable, NegativeSampler, TrainConfig};
pub use hetnet::{HetGraph, NodeId, NodeType};
pub use ingest::{RawRecord, Record, Vocabulary};
pub use query::{EvalSet, Query, RankedResults};
pub use walker::{Metapath, WalkCorpus};
