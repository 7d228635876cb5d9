//! Plain-text artifact formats.
//!
//! Every artifact starts with a one-line version header `#geohin <kind> <version>`.
//! Floats are written with Rust's shortest round-trip formatting (with an
//! exponent for embedding components), so reading a file back yields
//! bit-identical values.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use geohin_core::cluster::{ClusterModel, Mode, Modality};
use geohin_core::embed::Embeddings;
use geohin_core::hetnet::{HetGraph, NodeId};
use geohin_core::ingest::{parse_record, RawRecord, StopWords, Vocabulary};
use geohin_core::walker::WalkCorpus;

pub const FORMAT_VERSION: u32 = 1;

/// Artifact kinds, as named in the header line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Vocab,
    Cluster,
    Graph,
    Walks,
    Embeddings,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Vocab => "vocab",
            Kind::Cluster => "cluster",
            Kind::Graph => "graph",
            Kind::Walks => "walks",
            Kind::Embeddings => "embeddings",
        }
    }

    pub fn header(self) -> String {
        format!("#geohin {} {}", self.name(), FORMAT_VERSION)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {err}")]
    Io { path: PathBuf, err: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl FormatError {
    fn io(path: &Path, source: io::Error) -> Self {
        FormatError::Io { path: path.to_path_buf(), err: source }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

type Result<T> = std::result::Result<T, FormatError>;

/// Lines of a text source with their 1-based numbers; `path` only labels
/// errors.
struct Lines<'p, R> {
    path: &'p Path,
    inner: io::Lines<R>,
    number: usize,
}

impl<'p, R: BufRead> Lines<'p, R> {
    fn new(path: &'p Path, reader: R) -> Self {
        Self { path, inner: reader.lines(), number: 0 }
    }

    fn next_line(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            None => Ok(None),
            Some(Err(e)) => Err(FormatError::io(self.path, e)),
            Some(Ok(l)) => {
                self.number += 1;
                Ok(Some(l))
            }
        }
    }

    fn require(&mut self, what: &str) -> Result<String> {
        self.next_line()?
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn err(&self, message: impl Into<String>) -> FormatError {
        FormatError::parse(self.path, self.number, message)
    }

    fn expect_header(&mut self, kind: Kind) -> Result<()> {
        let line = self.require("a version header")?;
        if line.trim_end() != kind.header() {
            return Err(self.err(format!(
                "format mismatch: expected header {:?}, found {:?}",
                kind.header(),
                line
            )));
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines<'_, impl BufRead>, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| lines.err(format!("bad {what} {s:?}")))
}

fn parse_node(lines: &Lines<'_, impl BufRead>, s: &str) -> Result<NodeId> {
    s.parse().map_err(|e: geohin_core::hetnet::NodeParseError| lines.err(e.to_string()))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| FormatError::io(path, e))
}

/// Writes `contents` to `path` in one go.
pub fn save(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut w = BufWriter::new(f);
    w.write_all(contents.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| FormatError::io(path, e))
}

// ---------------------------------------------------------------- records

/// Records that failed to parse, grouped by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RejectStats {
    pub total: usize,
    pub by_reason: std::collections::BTreeMap<&'static str, usize>,
}

/// Parses a record file, skipping and logging malformed lines. Blank lines
/// are ignored.
pub fn read_records<R: BufRead>(
    path: &Path,
    reader: R,
    stopwords: &StopWords,
) -> Result<(Vec<RawRecord>, RejectStats)> {
    let mut lines = Lines::new(path, reader);
    let mut out = Vec::new();
    let mut rejects = RejectStats::default();
    while let Some(line) = lines.next_line()? {
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line, stopwords) {
            Ok(r) => out.push(r),
            Err(e) => {
                log::warn!("{}:{}: rejected record: {e}", path.display(), lines.number);
                rejects.total += 1;
                *rejects.by_reason.entry(e.kind()).or_insert(0) += 1;
            }
        }
    }
    Ok((out, rejects))
}

pub fn load_records(path: &Path, stopwords: &StopWords) -> Result<(Vec<RawRecord>, RejectStats)> {
    read_records(path, open(path)?, stopwords)
}

pub fn load_stopwords(path: &Path) -> Result<StopWords> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    Ok(StopWords::from_lines(text.lines()))
}

// ---------------------------------------------------------------- vocabulary

pub fn vocab_to_string(v: &Vocabulary) -> String {
    let mut s = Kind::Vocab.header();
    s.push('\n');
    for (w, c) in v.iter() {
        let _ = writeln!(s, "{w}\t{c}");
    }
    s
}

pub fn read_vocab<R: BufRead>(path: &Path, reader: R) -> Result<Vocabulary> {
    let mut lines = Lines::new(path, reader);
    lines.expect_header(Kind::Vocab)?;
    let mut words = Vec::new();
    while let Some(line) = lines.next_line()? {
        let (w, c) = line
            .split_once('\t')
            .ok_or_else(|| lines.err("expected word<TAB>count"))?;
        words.push((w.to_string(), parse_num(&lines, c, "count")?));
    }
    Vocabulary::from_ranked(words).map_err(|e| lines.err(e.to_string()))
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    read_vocab(path, open(path)?)
}

// ---------------------------------------------------------------- clusters

pub fn cluster_to_string(m: &ClusterModel) -> String {
    let mut s = Kind::Cluster.header();
    let _ = writeln!(s, "\n{} {} {} {}", m.modality, m.bandwidth, m.merge_radius, m.modes.len());
    for (i, mode) in m.modes.iter().enumerate() {
        let _ = write!(s, "{i}");
        for c in &mode.center {
            let _ = write!(s, " {c}");
        }
        let _ = writeln!(s, " {}", mode.population);
    }
    s
}

pub fn read_cluster<R: BufRead>(path: &Path, reader: R) -> Result<ClusterModel> {
    let mut lines = Lines::new(path, reader);
    lines.expect_header(Kind::Cluster)?;
    let head = lines.require("the model header")?;
    let f: Vec<&str> = head.split(' ').collect();
    if f.len() != 4 {
        return Err(lines.err("expected `modality h merge_radius mode_count`"));
    }
    let modality: Modality = f[0].parse().map_err(|e: geohin_core::cluster::ClusterError| lines.err(e.to_string()))?;
    let bandwidth: f64 = parse_num(&lines, f[1], "bandwidth")?;
    let merge_radius: f64 = parse_num(&lines, f[2], "merge radius")?;
    let count: usize = parse_num(&lines, f[3], "mode count")?;
    let dim = modality.dim();
    let mut modes = Vec::with_capacity(count);
    for i in 0..count {
        let line = lines.require("a mode line")?;
        let f: Vec<&str> = line.split(' ').collect();
        if f.len() != dim + 2 {
            return Err(lines.err(format!("expected {} fields", dim + 2)));
        }
        let idx: usize = parse_num(&lines, f[0], "mode index")?;
        if idx != i {
            return Err(lines.err(format!("mode index {idx} out of sequence")));
        }
        let center = f[1..=dim]
            .iter()
            .map(|s| parse_num(&lines, s, "coordinate"))
            .collect::<Result<Vec<f64>>>()?;
        let population = parse_num(&lines, f[dim + 1], "population")?;
        modes.push(Mode { center, population });
    }
    if let Some(extra) = lines.next_line()? {
        if !extra.trim().is_empty() {
            return Err(lines.err("trailing data after the last mode"));
        }
    }
    Ok(ClusterModel { modality, bandwidth, merge_radius, modes })
}

pub fn load_cluster(path: &Path) -> Result<ClusterModel> {
    read_cluster(path, open(path)?)
}

// ---------------------------------------------------------------- graph

/// One `type:key<TAB>type:key<TAB>weight` line per edge, lines sorted.
pub fn graph_to_string(g: &HetGraph) -> String {
    let mut lines: Vec<String> = g
        .edges()
        .map(|(u, v, w)| format!("{}\t{}\t{}", g.node(u), g.node(v), w))
        .collect();
    lines.sort_unstable();
    let mut s = Kind::Graph.header();
    s.push('\n');
    for l in lines {
        s.push_str(&l);
        s.push('\n');
    }
    s
}

pub fn read_graph<R: BufRead>(path: &Path, reader: R) -> Result<HetGraph> {
    let mut lines = Lines::new(path, reader);
    lines.expect_header(Kind::Graph)?;
    let mut edges = Vec::new();
    while let Some(line) = lines.next_line()? {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(lines.err("expected node<TAB>node<TAB>weight"));
        }
        edges.push((parse_node(&lines, f[0])?, parse_node(&lines, f[1])?, parse_num(&lines, f[2], "weight")?));
    }
    HetGraph::from_edges(edges).map_err(|e| lines.err(e.to_string()))
}

pub fn load_graph(path: &Path) -> Result<HetGraph> {
    read_graph(path, open(path)?)
}

// ---------------------------------------------------------------- walks

pub fn walks_to_string(c: &WalkCorpus) -> String {
    let mut s = Kind::Walks.header();
    s.push('\n');
    for i in 0..c.len() {
        for (j, n) in c.walk_ids(i).enumerate() {
            if j > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{n}");
        }
        s.push('\n');
    }
    s
}

pub fn read_walks<R: BufRead>(path: &Path, reader: R) -> Result<WalkCorpus> {
    let mut lines = Lines::new(path, reader);
    lines.expect_header(Kind::Walks)?;
    let mut walks = Vec::new();
    while let Some(line) = lines.next_line()? {
        let walk = line
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(|t| parse_node(&lines, t))
            .collect::<Result<Vec<_>>>()?;
        if walk.is_empty() {
            return Err(lines.err("empty walk"));
        }
        walks.push(walk);
    }
    Ok(WalkCorpus::from_walks(walks))
}

pub fn load_walks(path: &Path) -> Result<WalkCorpus> {
    read_walks(path, open(path)?)
}

// ---------------------------------------------------------------- embeddings

/// Header, then `N d`, then `type:key v1 .. vd` per node.
pub fn embeddings_to_string(e: &Embeddings) -> String {
    let mut s = Kind::Embeddings.header();
    let _ = writeln!(s, "\n{} {}", e.len(), e.dim());
    for (i, n) in e.nodes().iter().enumerate() {
        let _ = write!(s, "{n}");
        for x in e.row(i as u32) {
            let _ = write!(s, " {x:?}");
        }
        s.push('\n');
    }
    s
}

pub fn read_embeddings<R: BufRead>(path: &Path, reader: R) -> Result<Embeddings> {
    let mut lines = Lines::new(path, reader);
    lines.expect_header(Kind::Embeddings)?;
    let head = lines.require("`N d`")?;
    let (n, d) = head.split_once(' ').ok_or_else(|| lines.err("expected `N d`"))?;
    let n: usize = parse_num(&lines, n, "node count")?;
    let d: usize = parse_num(&lines, d, "dimension")?;
    let mut nodes = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * d);
    for _ in 0..n {
        let line = lines.require("a vector line")?;
        let mut f = line.split(' ');
        nodes.push(parse_node(&lines, f.next().unwrap_or_default())?);
        let before = vectors.len();
        for x in f {
            vectors.push(parse_num(&lines, x, "component")?);
        }
        if vectors.len() - before != d {
            return Err(lines.err(format!("expected {d} components")));
        }
    }
    Embeddings::new(nodes, d, vectors).map_err(|e| lines.err(e.to_string()))
}

pub fn load_embeddings(path: &Path) -> Result<Embeddings> {
    read_embeddings(path, open(path)?)
}
