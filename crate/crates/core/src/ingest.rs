//! Record parsing, tokenization and vocabulary construction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// A latitude / longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, ParseError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(ParseError::LatitudeRange(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(ParseError::LongitudeRange(lon));
        }
        Ok(Self { lat, lon })
    }
}

/// A parsed input line whose text is tokenized but not yet restricted to a
/// vocabulary. Token order and repeats are kept for frequency counting.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: i64,
    pub location: GeoPoint,
    pub tokens: Vec<String>,
}

/// A record whose keyword set is restricted to the vocabulary.
///
/// `keywords` is sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub timestamp: i64,
    pub location: GeoPoint,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("expected 4 tab-separated fields, found {0}")]
    FieldCount(usize),
    #[error("bad timestamp {0:?}")]
    Timestamp(String),
    #[error("bad latitude {0:?}")]
    Latitude(String),
    #[error("bad longitude {0:?}")]
    Longitude(String),
    #[error("latitude {0} out of range [-90, 90]")]
    LatitudeRange(f64),
    #[error("longitude {0} out of range [-180, 180]")]
    LongitudeRange(f64),
}

impl ParseError {
    /// Short stable label, used for rejection counters.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::FieldCount(_) => "field_count",
            ParseError::Timestamp(_) => "timestamp",
            ParseError::Latitude(_) | ParseError::LatitudeRange(_) => "latitude",
            ParseError::Longitude(_) | ParseError::LongitudeRange(_) => "longitude",
        }
    }
}

/// A lowercase stopword set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords(BTreeSet<String>);

impl StopWords {
    pub fn new() -> Self {
        Self::default()
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Self {
        Self(
            lines
                .into_iter()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.to_lowercase())
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopWords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Lowercases, splits on anything that is not alphanumeric, and drops
/// stopwords. Repeats are kept.
pub fn tokenize(text: &str, stopwords: &StopWords) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .map(String::from)
        .collect()
}

/// Parses `epoch_seconds<TAB>latitude<TAB>longitude<TAB>text`.
pub fn parse_record(line: &str, stopwords: &StopWords) -> Result<RawRecord, ParseError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let fields: Vec<&str> = line.splitn(4, '\t').collect();
    if fields.len() != 4 {
        return Err(ParseError::FieldCount(fields.len()));
    }
    let timestamp = fields[0]
        .trim()
        .parse::<i64>()
        .map_err(|_| ParseError::Timestamp(fields[0].to_string()))?;
    let lat = fields[1]
        .trim()
        .parse::<f64>()
        .map_err(|_| ParseError::Latitude(fields[1].to_string()))?;
    let lon = fields[2]
        .trim()
        .parse::<f64>()
        .map_err(|_| ParseError::Longitude(fields[2].to_string()))?;
    let location = GeoPoint::new(lat, lon)?;
    Ok(RawRecord {
        timestamp,
        location,
        tokens: tokenize(fields[3], stopwords),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabError {
    #[error("vocabulary cap k must be at least 1")]
    ZeroCap,
    #[error("vocabulary entries are not in rank order at {0:?}")]
    NotRanked(String),
    #[error("duplicate vocabulary word {0:?}")]
    Duplicate(String),
}

/// Frequency-ranked word list with a reverse index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<(String, u64)>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Builds from entries that are already in rank order (non-increasing
    /// counts, lexicographic within ties).
    pub fn from_ranked(words: Vec<(String, u64)>) -> Result<Self, VocabError> {
        for pair in words.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.1 > a.1 || (b.1 == a.1 && b.0 <= a.0) {
                if b.0 == a.0 {
                    return Err(VocabError::Duplicate(b.0.clone()));
                }
                return Err(VocabError::NotRanked(b.0.clone()));
            }
        }
        let mut index = BTreeMap::new();
        for (i, (w, _)) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(VocabError::Duplicate(w.clone()));
            }
        }
        Ok(Self { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn rank(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.rank(word).map(|i| self.words[i].1)
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words.iter().map(|(w, c)| (w.as_str(), *c))
    }
}

/// Mergeable token counts; shards can be counted separately and combined.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VocabCounter {
    counts: BTreeMap<String, u64>,
}

impl VocabCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_tokens<S: AsRef<str>>(&mut self, tokens: &[S]) {
        for t in tokens {
            let t = t.as_ref();
            match self.counts.get_mut(t) {
                Some(c) => *c += 1,
                None => {
                    self.counts.insert(t.to_string(), 1);
                }
            }
        }
    }

    pub fn merge(&mut self, other: VocabCounter) {
        for (w, c) in other.counts {
            *self.counts.entry(w).or_insert(0) += c;
        }
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Keeps the `k` most frequent eligible words, ties broken by ascending
    /// lexicographic order.
    pub fn into_vocabulary(
        self,
        k: usize,
        stopwords: &StopWords,
        min_freq: u64,
    ) -> Result<Vocabulary, VocabError> {
        if k == 0 {
            return Err(VocabError::ZeroCap);
        }
        let mut eligible: Vec<(String, u64)> = self
            .counts
            .into_iter()
            .filter(|(w, c)| *c >= min_freq && !stopwords.contains(w))
            .collect();
        // BTreeMap order is already lexicographic; a stable sort keeps it within ties.
        eligible.sort_by_key(|e| core::cmp::Reverse(e.1));
        eligible.truncate(k);
        Vocabulary::from_ranked(eligible)
    }
}

pub fn build_vocabulary<'a>(
    corpus: impl IntoIterator<Item = &'a RawRecord>,
    k: usize,
    stopwords: &StopWords,
    min_freq: u64,
) -> Result<Vocabulary, VocabError> {
    let mut counter = VocabCounter::new();
    for r in corpus {
        counter.add_tokens(&r.tokens);
    }
    counter.into_vocabulary(k, stopwords, min_freq)
}

/// Intersects the record's tokens with the vocabulary and deduplicates.
/// Records that end up with no keywords are still valid.
pub fn restrict_record(raw: &RawRecord, vocab: &Vocabulary) -> Record {
    let set: BTreeSet<&str> = raw
        .tokens
        .iter()
        .map(String::as_str)
        .filter(|t| vocab.contains(t))
        .collect();
    Record {
        timestamp: raw.timestamp,
        location: raw.location,
        keywords: set.into_iter().map(String::from).collect(),
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}
