use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use geohin::formats;
use geohin::pipeline::{self, GraphInputs, Model, Params, PipelineConfig};
use geohin::synth::{records_to_tsv, PlantedConfig, PlantedCorpus, TimeLink};
use geohin_core::cluster::{Modality, TimeMapping};
use geohin_core::ingest::GeoPoint;
use geohin_core::query::{ranked_results, Query};
use geohin_core::walker::Metapath;

/// Time-location-word network embedding for geo-tagged posts.
#[derive(Debug, Parser)]
#[command(name = "geohin", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct VocabArgs {
    /// Vocabulary size cap.
    #[arg(long = "vocab-k", env = "GEOHIN_VOCAB_K", default_value_t = 20_000)]
    k: usize,
    /// Minimum corpus frequency.
    #[arg(long, env = "GEOHIN_MIN_FREQ", default_value_t = 100)]
    min_freq: u64,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// Location bandwidth in degrees.
    #[arg(long, env = "GEOHIN_LOC_BANDWIDTH", default_value_t = 0.05)]
    loc_bandwidth: f64,
    /// Time bandwidth in seconds.
    #[arg(long, env = "GEOHIN_TIME_BANDWIDTH", default_value_t = 1000.0)]
    time_bandwidth: f64,
    /// absolute, day or week.
    #[arg(long, env = "GEOHIN_TIME_MAPPING", default_value = "day")]
    time_mapping: TimeMapping,
}

#[derive(Debug, Args)]
struct WalkArgs {
    #[arg(long, env = "GEOHIN_METAPATH", default_value = "W-W-L-W-W")]
    metapath: Metapath,
    #[arg(long, env = "GEOHIN_NUM_WALKS", default_value_t = 30)]
    num_walks: usize,
    #[arg(long, env = "GEOHIN_WALK_LENGTH", default_value_t = 50)]
    walk_length: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, env = "GEOHIN_DIM", default_value_t = 300)]
    dim: usize,
    #[arg(long, env = "GEOHIN_NEGATIVES", default_value_t = 5)]
    negatives: usize,
    #[arg(long, env = "GEOHIN_WINDOW", default_value_t = 7)]
    window: usize,
    #[arg(long, env = "GEOHIN_EPOCHS", default_value_t = 5)]
    epochs: usize,
    /// Initial learning rate.
    #[arg(long = "lr", env = "GEOHIN_LR", default_value_t = 0.025)]
    learning_rate: f64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, env = "GEOHIN_SEED", default_value_t = 1)]
    seed: u64,
    /// Worker threads; 1 is fully deterministic.
    #[arg(long, env = "GEOHIN_WORKERS", default_value_t = 1)]
    workers: usize,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Directory holding the artifacts of a pipeline run.
    #[arg(long, env = "GEOHIN_MODEL_DIR", default_value = ".")]
    model_dir: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    time_model: Option<PathBuf>,
    #[arg(long)]
    space_model: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

impl ModelArgs {
    fn pick(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.model_dir.join(name))
    }

    fn load(&self) -> geohin::pipeline::Result<Model> {
        Model::load(
            &self.pick(&self.vocab, pipeline::VOCAB_FILE),
            &self.pick(&self.time_model, pipeline::TIME_CLUSTER_FILE),
            &self.pick(&self.space_model, pipeline::SPACE_CLUSTER_FILE),
            &self.pick(&self.embeddings, pipeline::EMBEDDINGS_FILE),
        )
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModalityArg {
    Time,
    Space,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct QueryTerm {
    #[arg(long)]
    word: Option<String>,
    /// Unix timestamp in seconds.
    #[arg(long, allow_negative_numbers = true)]
    time: Option<i64>,
    /// `lat,lon` in degrees.
    #[arg(long, value_parser = parse_latlon, allow_hyphen_values = true)]
    latlon: Option<GeoPoint>,
}

fn parse_latlon(s: &str) -> Result<GeoPoint, String> {
    let (lat, lon) = s.split_once(',').ok_or("expected lat,lon")?;
    let lat: f64 = lat.trim().parse().map_err(|_| format!("bad latitude {lat:?}"))?;
    let lon: f64 = lon.trim().parse().map_err(|_| format!("bad longitude {lon:?}"))?;
    GeoPoint::new(lat, lon).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count words and write the ranked vocabulary.
    Vocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, env = "GEOHIN_STOPWORDS")]
        stopwords: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        vocab: VocabArgs,
    },
    /// Find time or location clusters by mean shift.
    Cluster {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        modality: ModalityArg,
        /// Overrides the modality's default bandwidth.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[command(flatten)]
        cluster: ClusterArgs,
        #[arg(long, env = "GEOHIN_WORKERS", default_value_t = 1)]
        workers: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Build the time-location-word co-occurrence network.
    Graph {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, env = "GEOHIN_STOPWORDS")]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        time_model: PathBuf,
        #[arg(long)]
        space_model: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Sample metapath-guided random walks.
    Walk {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train skip-gram vectors on a walk corpus.
    Embed {
        #[arg(long)]
        walks: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Nearest times, locations and words for one query.
    Query {
        #[command(flatten)]
        term: QueryTerm,
        #[command(flatten)]
        model: ModelArgs,
        /// Rows per node type.
        #[arg(long, short, default_value_t = 10)]
        k: usize,
        /// Write location results as a GeoJSON FeatureCollection.
        #[arg(long)]
        geojson: Option<PathBuf>,
    },
    /// Mean reciprocal rank on held-out records.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, env = "GEOHIN_STOPWORDS")]
        stopwords: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        /// Only rank this many candidates; misses score zero.
        #[arg(long)]
        cutoff: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run every stage, writing all artifacts to one directory.
    Pipeline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, env = "GEOHIN_STOPWORDS")]
        stopwords: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Held-out records to evaluate on.
        #[arg(long)]
        eval_corpus: Option<PathBuf>,
        #[command(flatten)]
        vocab: VocabArgs,
        #[command(flatten)]
        cluster: ClusterArgs,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a synthetic corpus with planted word-place-time cells.
    Synth {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        records: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also link location blobs 0+1 and 2+3 through shared time slots.
        #[arg(long)]
        time_links: bool,
    },
}

fn params(walk: Option<&WalkArgs>, train: Option<&TrainArgs>, run: &RunArgs) -> Params {
    let mut p = Params { seed: run.seed, workers: run.workers, ..Params::default() };
    if let Some(w) = walk {
        p.metapath = w.metapath.clone();
        p.num_walks = w.num_walks;
        p.walk_length = w.walk_length;
    }
    if let Some(t) = train {
        p.dim = t.dim;
        p.negatives = t.negatives;
        p.window = t.window;
        p.epochs = t.epochs;
        p.learning_rate = t.learning_rate;
    }
    p
}

fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => formats::save(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Vocab { corpus, stopwords, out, vocab } => {
            if vocab.k == 0 {
                bail!("--vocab-k must be at least 1");
            }
            let v = pipeline::run_vocab(&corpus, stopwords.as_deref(), &out, vocab.k, vocab.min_freq)?;
            log::info!("{} words written to {}", v.len(), out.display());
        }
        Command::Cluster { corpus, modality, bandwidth, cluster, workers, out } => {
            let (m, h) = match modality {
                ModalityArg::Time => (Modality::Time(cluster.time_mapping), cluster.time_bandwidth),
                ModalityArg::Space => (Modality::Space, cluster.loc_bandwidth),
            };
            let model = pipeline::run_cluster(&corpus, m, bandwidth.unwrap_or(h), workers.max(1), &out)?;
            log::info!("{} {m} modes written to {}", model.len(), out.display());
        }
        Command::Graph { corpus, stopwords, vocab, time_model, space_model, out } => {
            let inputs = GraphInputs {
                corpus: &corpus,
                stopwords: stopwords.as_deref(),
                vocab: &vocab,
                time_model: &time_model,
                space_model: &space_model,
            };
            let g = pipeline::run_graph(&inputs, &out)?;
            log::info!("{} nodes, {} edges written to {}", g.node_count(), g.edge_count(), out.display());
        }
        Command::Walk { graph, out, walk, run } => {
            let p = params(Some(&walk), None, &run);
            p.walk_config().validate()?;
            pipeline::run_walk(&graph, &p, &out)?;
        }
        Command::Embed { walks, out, train, run } => {
            let p = params(None, Some(&train), &run);
            pipeline::run_embed(&walks, &p, &out)?;
        }
        Command::Query { term, model, k, geojson } => {
            let m = model.load()?;
            let q = match (term.word, term.time, term.latlon) {
                (Some(w), _, _) => Query::Word(w),
                (_, Some(t), _) => Query::Time(t),
                (_, _, Some(p)) => Query::Location(p),
                _ => bail!("one of --word, --time or --latlon is required"),
            };
            let node = m.resolve(&q)?;
            let results = ranked_results(&m.embeddings, &node, k)?;
            print!("{}", pipeline::format_rank_table(&results));
            if let Some(path) = geojson {
                let rows = results.per_type.get(&geohin_core::NodeType::L).cloned().unwrap_or_default();
                let fc = geohin::geojson::location_features(&rows, &m.space_model);
                formats::save(&path, &format!("{}\n", serde_json::to_string_pretty(&fc)?))?;
            }
        }
        Command::Eval { corpus, stopwords, model, cutoff, out } => {
            let m = model.load()?;
            let sw = match &stopwords {
                Some(p) => formats::load_stopwords(p)?,
                None => Default::default(),
            };
            let records = pipeline::load_corpus(&corpus, &sw)?;
            let report = m.evaluate(&records, cutoff)?;
            write_or_print(out.as_deref(), &pipeline::format_report(&report))?;
        }
        Command::Pipeline { corpus, stopwords, out_dir, eval_corpus, vocab, cluster, walk, train, run } => {
            let mut p = params(Some(&walk), Some(&train), &run);
            p.loc_bandwidth = cluster.loc_bandwidth;
            p.time_bandwidth = cluster.time_bandwidth;
            p.time_mapping = cluster.time_mapping;
            p.vocab_k = vocab.k;
            p.min_freq = vocab.min_freq;
            let cfg = PipelineConfig { corpus, stopwords, out_dir, eval_corpus, params: p };
            let output = pipeline::run_pipeline(&cfg)?;
            for a in &output.artifacts {
                println!("{}", a.display());
            }
            if let Some(r) = &output.report {
                print!("{}", pipeline::format_report(r));
            }
        }
        Command::Synth { out, records, seed, time_links } => {
            let mut c = PlantedCorpus::generate(PlantedConfig { records, seed, ..PlantedConfig::default() });
            if time_links {
                c.add_time_links(&default_links(records));
            }
            formats::save(&out, &records_to_tsv(&c.records)).context("writing synthetic corpus")?;
        }
    }
    Ok(())
}

fn default_links(records: usize) -> Vec<TimeLink> {
    let n = records / 10;
    vec![
        TimeLink { locations: [0, 1], time_of_day: 6.0 * 3600.0, records_per_location: n },
        TimeLink { locations: [2, 3], time_of_day: 12.0 * 3600.0, records_per_location: n },
    ]
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GEOHIN_LOG", level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
