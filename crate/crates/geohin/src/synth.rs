//! Synthetic corpora with planted word / place / time structure.

use std::fmt::Write as _;

use geohin_core::ingest::{GeoPoint, RawRecord};
use geohin_core::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub records: usize,
    /// Midnight of the first day.
    pub base_day: i64,
    pub days: i64,
    /// `(lat, lon)` blob centres.
    pub locations: Vec<(f64, f64)>,
    pub location_sigma: f64,
    /// Time blob centres in seconds after midnight.
    pub times: Vec<f64>,
    pub time_sigma: f64,
    /// Chance that a record carries its cell's signal word.
    pub signal_prob: f64,
    pub noise_words: usize,
    pub noise_per_record: (usize, usize),
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            records: 10_000,
            base_day: 1_406_851_200,
            days: 30,
            locations: (0..5).map(|i| (34.0 + 0.3 * (i % 3) as f64, -118.0 + 0.3 * (i / 3) as f64)).collect(),
            location_sigma: 0.01,
            times: vec![3.0 * 3600.0, 9.0 * 3600.0, 15.0 * 3600.0, 21.0 * 3600.0],
            time_sigma: 600.0,
            signal_prob: 1.0,
            noise_words: 180,
            noise_per_record: (1, 3),
            seed: 42,
        }
    }
}

/// A word planted in exactly one (location blob, time blob) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalWord {
    pub word: String,
    pub location: usize,
    pub time: usize,
}

/// Extra word-less records placing two location blobs in one shared time
/// slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLink {
    pub locations: [usize; 2],
    pub time_of_day: f64,
    pub records_per_location: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    pub config: PlantedConfig,
    pub signals: Vec<SignalWord>,
    pub records: Vec<RawRecord>,
}

pub fn signal_word(i: usize) -> String {
    format!("signal{i:02}")
}

pub fn noise_word(i: usize) -> String {
    format!("noise{i:03}")
}

struct Sampler {
    rng: rng::PipelineRng,
    unit: Normal<f64>,
}

impl Sampler {
    fn new(seed: u64, stream: u64) -> Self {
        Self { rng: rng::stream(seed, &[stream]), unit: Normal::new(0.0, 1.0).expect("unit normal") }
    }

    fn normal(&mut self, mean: f64, sigma: f64) -> f64 {
        mean + sigma * self.unit.sample(&mut self.rng)
    }

    fn record(&mut self, cfg: &PlantedConfig, loc: usize, time_of_day: f64, tokens: Vec<String>) -> RawRecord {
        let (lat, lon) = cfg.locations[loc];
        let location = GeoPoint::new(
            self.normal(lat, cfg.location_sigma).clamp(-90.0, 90.0),
            self.normal(lon, cfg.location_sigma).clamp(-180.0, 180.0),
        )
        .expect("clamped coordinates");
        let day = self.rng.random_range(0..cfg.days.max(1));
        let offset = (self.normal(time_of_day, cfg.time_sigma).round() as i64).rem_euclid(DAY);
        RawRecord { timestamp: cfg.base_day + day * DAY + offset, location, tokens }
    }
}

impl PlantedCorpus {
    /// Every record falls in a uniformly chosen cell, carries that cell's
    /// signal word with probability `signal_prob` and a handful of noise
    /// words drawn uniformly.
    pub fn generate(config: PlantedConfig) -> Self {
        let (nl, nt) = (config.locations.len(), config.times.len());
        let signals: Vec<SignalWord> = (0..nl * nt)
            .map(|i| SignalWord { word: signal_word(i), location: i / nt, time: i % nt })
            .collect();
        let mut s = Sampler::new(config.seed, 0);
        let (lo, hi) = config.noise_per_record;
        let records = (0..config.records)
            .map(|_| {
                let cell = s.rng.random_range(0..signals.len());
                let mut tokens = Vec::new();
                if s.rng.random_bool(config.signal_prob) {
                    tokens.push(signals[cell].word.clone());
                }
                for _ in 0..s.rng.random_range(lo..=hi) {
                    tokens.push(noise_word(s.rng.random_range(0..config.noise_words)));
                }
                let sig = &signals[cell];
                s.record(&config, sig.location, config.times[sig.time], tokens)
            })
            .collect();
        Self { config, signals, records }
    }

    /// Appends word-less records for each link.
    pub fn add_time_links(&mut self, links: &[TimeLink]) {
        let mut s = Sampler::new(self.config.seed, 1);
        for link in links {
            for &loc in &link.locations {
                for _ in 0..link.records_per_location {
                    let r = s.record(&self.config, loc, link.time_of_day, Vec::new());
                    self.records.push(r);
                }
            }
        }
    }

    /// The partner blob of `location` under `links`, if any.
    pub fn partner(links: &[TimeLink], location: usize) -> Option<usize> {
        links.iter().find_map(|l| match l.locations {
            [a, b] if a == location => Some(b),
            [a, b] if b == location => Some(a),
            _ => None,
        })
    }
}

/// Records in the tab-separated input format.
pub fn records_to_tsv(records: &[RawRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", r.timestamp, r.location.lat, r.location.lon, r.tokens.join(" "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use geohin_core::ingest::{parse_record, StopWords};

    #[test]
    fn signal_words_stay_in_their_cell() {
        let c = PlantedCorpus::generate(PlantedConfig { records: 2000, ..PlantedConfig::default() });
        assert_eq!(c.signals.len(), 20);
        assert_eq!(c.records.len(), 2000);
        for r in &c.records {
            let sig: Vec<_> = r.tokens.iter().filter(|t| t.starts_with("signal")).collect();
            assert!(sig.len() <= 1);
            if let Some(w) = sig.first() {
                let s = c.signals.iter().find(|s| &&s.word == w).unwrap();
                let (lat, lon) = c.config.locations[s.location];
                assert!((r.location.lat - lat).abs() < 0.1 && (r.location.lon - lon).abs() < 0.1);
                let tod = (r.timestamp - c.config.base_day).rem_euclid(DAY) as f64;
                let d = (tod - c.config.times[s.time]).abs();
                assert!(d.min(DAY as f64 - d) < 6000.0);
            }
        }
    }

    #[test]
    fn tsv_round_trips() {
        let mut c = PlantedCorpus::generate(PlantedConfig { records: 50, ..PlantedConfig::default() });
        c.add_time_links(&[TimeLink { locations: [0, 1], time_of_day: 6.0 * 3600.0, records_per_location: 3 }]);
        assert_eq!(c.records.len(), 56);
        let tsv = records_to_tsv(&c.records);
        let sw = StopWords::new();
        let back: Vec<_> = tsv.lines().map(|l| parse_record(l, &sw).unwrap()).collect();
        assert_eq!(back, c.records);
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = PlantedConfig { records: 100, ..PlantedConfig::default() };
        assert_eq!(PlantedCorpus::generate(cfg.clone()), PlantedCorpus::generate(cfg.clone()));
        assert_ne!(
            PlantedCorpus::generate(cfg.clone()).records,
            PlantedCorpus::generate(PlantedConfig { seed: 7, ..cfg }).records
        );
    }
}
