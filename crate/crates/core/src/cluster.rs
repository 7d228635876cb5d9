//! Kernel density estimation and mean-shift mode seeking over times (1-D,
//! optionally periodic) and locations (2-D, Euclidean in degrees).
//!
//! Points are passed as flat coordinate slices of length `n * dim`.
//! Mode seeking runs in two phases: seeds taken from the occupied cells of a
//! grid are shifted over the cell centroids (each weighted by its point
//! count), then the merged modes are polished with exact-point steps over the
//! raw points near each mode. Both phases use the same Gaussian kernel,
//! truncated at [`KERNEL_SUPPORT`] bandwidths.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::ingest::GeoPoint;

/// Radius, in bandwidths, beyond which the kernel weight is treated as zero
/// during mean-shift steps (`exp(-18)` is about `1.5e-8`).
pub const KERNEL_SUPPORT: f64 = 6.0;

/// Exact-point polishing stops once a step is shorter than this fraction of
/// the convergence tolerance.
const POLISH_FACTOR: f64 = 0.1;

/// Upper bound on polish / re-merge rounds.
const MAX_MERGE_ROUNDS: usize = 16;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_WEEK: f64 = 604_800.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("bandwidth must be positive and finite, got {0}")]
    Bandwidth(f64),
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("cell size must be positive and finite, got {0}")]
    CellSize(f64),
    #[error("coordinate slice of length {len} is not a multiple of dimension {dim}")]
    Shape { len: usize, dim: usize },
    #[error("no data points")]
    Empty,
    #[error("unknown modality {0:?}")]
    UnknownModality(String),
    #[error("invalid mode-seeking parameter: {0}")]
    Params(&'static str),
}

/// Distance structure of a clustering space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    /// Every component lives on a circle of the given circumference.
    Periodic { period: f64 },
}

impl Metric {
    /// Signed displacement `to - from`, taking the short way round on a circle.
    #[inline]
    pub fn delta(&self, from: f64, to: f64) -> f64 {
        match *self {
            Metric::Euclidean => to - from,
            Metric::Periodic { period } => {
                let d = rem_euclid(to - from, period);
                if d >= period / 2.0 {
                    d - period
                } else {
                    d
                }
            }
        }
    }

    /// Canonical representative of a coordinate.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        match *self {
            Metric::Euclidean => x,
            Metric::Periodic { period } => {
                let w = rem_euclid(x, period);
                // rem_euclid can round up to exactly `period` for tiny negatives.
                if w >= period {
                    0.0
                } else {
                    w
                }
            }
        }
    }

    pub fn distance_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = self.delta(x, y);
                d * d
            })
            .sum()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        libm::sqrt(self.distance_sq(a, b))
    }
}

#[inline]
fn rem_euclid(x: f64, m: f64) -> f64 {
    let r = libm::fmod(x, m);
    if r < 0.0 {
        r + m
    } else {
        r
    }
}

/// How epoch seconds are mapped into the time clustering space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeMapping {
    /// Raw seconds on an unbounded line.
    Absolute,
    /// Seconds since midnight UTC, periodic with one day.
    Day,
    /// Seconds since the start of the epoch week, periodic with one week.
    Week,
}

impl TimeMapping {
    pub fn map(&self, timestamp: i64) -> f64 {
        match self {
            TimeMapping::Absolute => timestamp as f64,
            TimeMapping::Day => timestamp.rem_euclid(86_400) as f64,
            TimeMapping::Week => timestamp.rem_euclid(604_800) as f64,
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            TimeMapping::Absolute => Metric::Euclidean,
            TimeMapping::Day => Metric::Periodic { period: SECONDS_PER_DAY },
            TimeMapping::Week => Metric::Periodic { period: SECONDS_PER_WEEK },
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TimeMapping::Absolute => "absolute",
            TimeMapping::Day => "day",
            TimeMapping::Week => "week",
        }
    }
}

impl FromStr for TimeMapping {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" => Ok(TimeMapping::Absolute),
            "day" => Ok(TimeMapping::Day),
            "week" => Ok(TimeMapping::Week),
            other => Err(ClusterError::UnknownModality(other.into())),
        }
    }
}

impl fmt::Display for TimeMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which record field a cluster model covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Time(TimeMapping),
    Space,
}

impl Modality {
    pub fn dim(&self) -> usize {
        match self {
            Modality::Time(_) => 1,
            Modality::Space => 2,
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            Modality::Time(m) => m.metric(),
            Modality::Space => Metric::Euclidean,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Time(m) => write!(f, "time:{m}"),
            Modality::Space => f.write_str("space"),
        }
    }
}

impl FromStr for Modality {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "space" => Ok(Modality::Space),
            _ => match s.strip_prefix("time:") {
                Some(m) => m.parse().map(Modality::Time),
                None => Err(ClusterError::UnknownModality(s.into())),
            },
        }
    }
}

/// Gaussian kernel `exp(-|u|^2 / 2)` with bandwidth `h` over `dim` components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    bandwidth: f64,
    dim: usize,
}

impl KernelConfig {
    pub fn new(bandwidth: f64, dim: usize) -> Result<Self, ClusterError> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(ClusterError::Bandwidth(bandwidth));
        }
        if !(1..=2).contains(&dim) {
            return Err(ClusterError::Dimension(dim));
        }
        Ok(Self { bandwidth, dim })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Kernel weight of an already bandwidth-scaled displacement.
    pub fn kernel_eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        gaussian(u.iter().map(|x| x * x).sum())
    }
}

#[inline]
fn gaussian(sq_norm: f64) -> f64 {
    libm::exp(-0.5 * sq_norm)
}

pub type CellKey = [i64; 2];

/// Aggregate of the points that fall in one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    count: u64,
    sum: [f64; 2],
    members: Vec<u32>,
}

impl Cell {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self, dim: usize) -> &[f64] {
        &self.sum[..dim]
    }

    /// Indices of the member points, in input order.
    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn centroid(&self, dim: usize) -> [f64; 2] {
        let n = self.count as f64;
        let mut c = [0.0; 2];
        for (out, s) in c.iter_mut().zip(&self.sum[..dim]) {
            *out = s / n;
        }
        c
    }
}

/// Points binned by `floor(coordinate / cell_size)` in every dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    cell_size: f64,
    metric: Metric,
    /// Wrapped copies of the input coordinates.
    points: Vec<f64>,
    cells: BTreeMap<CellKey, Cell>,
}

/// Bins points into a grid in a single pass.
pub fn build_grid(
    points: &[f64],
    dim: usize,
    cell_size: f64,
    metric: Metric,
) -> Result<Grid, ClusterError> {
    if !(1..=2).contains(&dim) {
        return Err(ClusterError::Dimension(dim));
    }
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(ClusterError::CellSize(cell_size));
    }
    if !points.len().is_multiple_of(dim) {
        return Err(ClusterError::Shape { len: points.len(), dim });
    }
    let wrapped: Vec<f64> = points.iter().map(|&x| metric.wrap(x)).collect();
    let mut cells: BTreeMap<CellKey, Cell> = BTreeMap::new();
    for (i, p) in wrapped.chunks_exact(dim).enumerate() {
        let key = cell_key(p, cell_size);
        let cell = cells.entry(key).or_insert_with(|| Cell {
            count: 0,
            sum: [0.0; 2],
            members: Vec::new(),
        });
        cell.count += 1;
        for (s, x) in cell.sum.iter_mut().zip(p) {
            *s += x;
        }
        cell.members.push(i as u32);
    }
    Ok(Grid {
        dim,
        cell_size,
        metric,
        points: wrapped,
        cells,
    })
}

fn cell_key(p: &[f64], cell_size: f64) -> CellKey {
    let mut key = [0i64; 2];
    for (k, x) in key.iter_mut().zip(p) {
        *k = libm::floor(x / cell_size) as i64;
    }
    key
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cells(&self) -> &BTreeMap<CellKey, Cell> {
        &self.cells
    }

    /// Key of the cell a (wrapped) point falls in.
    pub fn key_of(&self, p: &[f64]) -> CellKey {
        let mut w = [0.0; 2];
        for (o, &x) in w.iter_mut().zip(p) {
            *o = self.metric.wrap(x);
        }
        cell_key(&w[..self.dim], self.cell_size)
    }

    /// The exact-point view over the same data.
    pub fn exact(&self) -> ExactPoints<'_> {
        ExactPoints(self)
    }

    /// Visits every cell whose key lies within `radius` of `x` along each
    /// axis (possibly more).
    fn visit_cells(&self, x: &[f64], radius: f64, f: &mut dyn FnMut(&Cell)) {
        let reach = if radius.is_finite() {
            libm::ceil(radius / self.cell_size) as i64 + 1
        } else {
            i64::MAX
        };
        let side = reach.saturating_mul(2).saturating_add(1);
        let box_cells = if self.dim == 1 { side } else { side.saturating_mul(side) };
        let period_cells = match self.metric {
            Metric::Periodic { period } => Some(libm::ceil(period / self.cell_size) as i64),
            Metric::Euclidean => None,
        };
        let wraps_fully = period_cells.is_some_and(|n| side >= n);
        if wraps_fully || box_cells as u128 >= self.cells.len() as u128 {
            self.cells.values().for_each(f);
            return;
        }
        let center = self.key_of(x);
        let norm = |k: i64| match period_cells {
            Some(n) => k.rem_euclid(n),
            None => k,
        };
        if self.dim == 1 {
            for dk in -reach..=reach {
                if let Some(c) = self.cells.get(&[norm(center[0] + dk), 0]) {
                    f(c);
                }
            }
        } else {
            for d0 in -reach..=reach {
                let k0 = norm(center[0] + d0);
                let lo = [k0, norm(center[1] - reach)];
                let hi = [k0, norm(center[1] + reach)];
                if lo[1] <= hi[1] {
                    for (_, c) in self.cells.range(lo..=hi) {
                        f(c);
                    }
                } else {
                    for d1 in -reach..=reach {
                        if let Some(c) = self.cells.get(&[k0, norm(center[1] + d1)]) {
                            f(c);
                        }
                    }
                }
            }
        }
    }
}

/// A weighted point set mean-shift can run over.
pub trait WeightedSamples {
    fn dim(&self) -> usize;
    fn metric(&self) -> Metric;
    /// Sum of all sample weights (the `n` normalising the density).
    fn total_weight(&self) -> f64;
    /// Calls `f(point, weight)` for every sample within `radius` of `x`.
    /// Farther samples may be visited too.
    fn visit_near(&self, x: &[f64], radius: f64, f: &mut dyn FnMut(&[f64], f64));
}

/// Grid cells as samples: centroid weighted by point count.
impl WeightedSamples for Grid {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self) -> Metric {
        self.metric
    }

    fn total_weight(&self) -> f64 {
        self.len() as f64
    }

    fn visit_near(&self, x: &[f64], radius: f64, f: &mut dyn FnMut(&[f64], f64)) {
        let dim = self.dim;
        self.visit_cells(x, radius, &mut |c| {
            let centroid = c.centroid(dim);
            f(&centroid[..dim], c.count as f64);
        });
    }
}

/// Raw points as unit-weight samples, located through the grid.
#[derive(Debug, Clone, Copy)]
pub struct ExactPoints<'a>(&'a Grid);

impl WeightedSamples for ExactPoints<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn metric(&self) -> Metric {
        self.0.metric
    }

    fn total_weight(&self) -> f64 {
        self.0.len() as f64
    }

    fn visit_near(&self, x: &[f64], radius: f64, f: &mut dyn FnMut(&[f64], f64)) {
        let grid = self.0;
        grid.visit_cells(x, radius, &mut |c| {
            for &i in &c.members {
                f(grid.point(i as usize), 1.0);
            }
        });
    }
}

/// Kernel density `f(x) = 1/(n h^d) * sum_i w_i K((x_i - x)/h)`, untruncated.
pub fn kde<S: WeightedSamples + ?Sized>(
    x: &[f64],
    samples: &S,
    cfg: &KernelConfig,
) -> Result<f64, ClusterError> {
    let n = samples.total_weight();
    if n <= 0.0 {
        return Err(ClusterError::Empty);
    }
    let metric = samples.metric();
    let h = cfg.bandwidth;
    let mut acc = 0.0;
    samples.visit_near(x, f64::INFINITY, &mut |p, w| {
        let sq = metric.distance_sq(x, p) / (h * h);
        acc += w * gaussian(sq);
    });
    Ok(acc / (n * libm::pow(h, cfg.dim as f64)))
}

/// Result of one mean-shift step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next: Vec<f64>,
    /// Distance between the old and new centre.
    pub moved: f64,
    /// Total kernel weight underflowed; `next` equals the input.
    pub underflow: bool,
}

/// Moves `center` to the kernel-weighted mean of the samples around it.
pub fn mean_shift_step<S: WeightedSamples + ?Sized>(
    center: &[f64],
    samples: &S,
    cfg: &KernelConfig,
) -> Step {
    let metric = samples.metric();
    let h = cfg.bandwidth;
    let inv_h2 = 1.0 / (h * h);
    let cutoff_sq = KERNEL_SUPPORT * KERNEL_SUPPORT;
    let mut total = 0.0;
    let mut shift = [0.0f64; 2];
    let dim = center.len();
    samples.visit_near(center, KERNEL_SUPPORT * h, &mut |p, w| {
        let mut delta = [0.0; 2];
        let mut sq = 0.0;
        for k in 0..dim {
            delta[k] = metric.delta(center[k], p[k]);
            sq += delta[k] * delta[k];
        }
        let sq = sq * inv_h2;
        if sq > cutoff_sq {
            return;
        }
        let kw = w * gaussian(sq);
        total += kw;
        for k in 0..dim {
            shift[k] += kw * delta[k];
        }
    });
    if total.is_nan() || total <= 0.0 {
        return Step {
            next: center.to_vec(),
            moved: 0.0,
            underflow: true,
        };
    }
    let mut moved_sq = 0.0;
    let next = (0..dim)
        .map(|k| {
            let s = shift[k] / total;
            moved_sq += s * s;
            metric.wrap(center[k] + s)
        })
        .collect();
    Step {
        next,
        moved: libm::sqrt(moved_sq),
        underflow: false,
    }
}

/// Where a seed ended up after repeated mean-shift steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub end: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates `mean_shift_step` until a step is shorter than `tol` or
/// `max_iter` steps have been taken.
pub fn climb<S: WeightedSamples + ?Sized>(
    start: &[f64],
    samples: &S,
    cfg: &KernelConfig,
    tol: f64,
    max_iter: usize,
) -> Trajectory {
    let mut x = start.to_vec();
    for it in 1..=max_iter {
        let step = mean_shift_step(&x, samples, cfg);
        if step.underflow {
            return Trajectory { end: x, iterations: it, converged: false };
        }
        x = step.next;
        if step.moved < tol {
            return Trajectory { end: x, iterations: it, converged: true };
        }
    }
    Trajectory { end: x, iterations: max_iter, converged: false }
}

/// Tuning knobs for [`find_modes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    /// Stop iterating once a step is shorter than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Converged iterates closer than this collapse into one mode.
    pub merge_radius: f64,
    pub cell_size: f64,
}

impl ModeParams {
    /// `tol = 1e-4 h`, 200 iterations, merge radius and cell size `h / 2`.
    pub fn for_bandwidth(h: f64) -> Self {
        Self {
            tol: 1e-4 * h,
            max_iter: 200,
            merge_radius: 0.5 * h,
            cell_size: 0.5 * h,
        }
    }

    fn validate(&self) -> Result<(), ClusterError> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(ClusterError::Params("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(ClusterError::Params("max_iter must be at least 1"));
        }
        if self.merge_radius.is_nan() || self.merge_radius < 0.0 {
            return Err(ClusterError::Params("merge_radius must be non-negative"));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(ClusterError::CellSize(self.cell_size));
        }
        Ok(())
    }
}

/// A cluster centre and the number of points in its basin.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub center: Vec<f64>,
    pub population: u64,
}

/// Converged modes for one modality plus the rule mapping new points onto
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub modality: Modality,
    pub bandwidth: f64,
    pub merge_radius: f64,
    pub modes: Vec<Mode>,
}

impl ClusterModel {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn metric(&self) -> Metric {
        self.modality.metric()
    }

    /// Nearest mode; the lowest index wins ties.
    ///
    /// Panics if the model has no modes.
    pub fn assign(&self, x: &[f64]) -> usize {
        assert!(!self.modes.is_empty(), "assign on an empty cluster model");
        let metric = self.metric();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, m) in self.modes.iter().enumerate() {
            let d = metric.distance_sq(x, &m.center);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Maps a timestamp with this model's time mapping, then assigns it.
    /// Returns `None` for a space model.
    pub fn assign_timestamp(&self, timestamp: i64) -> Option<usize> {
        match self.modality {
            Modality::Time(m) => Some(self.assign(&[m.map(timestamp)])),
            Modality::Space => None,
        }
    }

    /// Returns `None` for a time model.
    pub fn assign_location(&self, p: GeoPoint) -> Option<usize> {
        match self.modality {
            Modality::Space => Some(self.assign(&[p.lat, p.lon])),
            Modality::Time(_) => None,
        }
    }
}

/// Output of [`find_modes`]: the model plus per-input-point assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub model: ClusterModel,
    /// Mode index for every input point, in input order.
    pub assignments: Vec<usize>,
    /// Seeds that hit `max_iter` or underflowed.
    pub unconverged_seeds: usize,
}

/// One grid seed: the centroid of an occupied cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub key: CellKey,
    pub start: Vec<f64>,
    pub count: u64,
}

/// Grid-accelerated mode search, split into stages so seeds can be climbed
/// concurrently.
#[derive(Debug, Clone)]
pub struct ModeSearch {
    modality: Modality,
    cfg: KernelConfig,
    params: ModeParams,
    grid: Grid,
}

impl ModeSearch {
    pub fn new(
        points: &[f64],
        modality: Modality,
        cfg: KernelConfig,
        params: ModeParams,
    ) -> Result<Self, ClusterError> {
        params.validate()?;
        if cfg.dim != modality.dim() {
            return Err(ClusterError::Dimension(cfg.dim));
        }
        let grid = build_grid(points, cfg.dim, params.cell_size, modality.metric())?;
        if grid.is_empty() {
            return Err(ClusterError::Empty);
        }
        Ok(Self { modality, cfg, params, grid })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// One seed per occupied cell, in key order.
    pub fn seeds(&self) -> Vec<Seed> {
        let dim = self.cfg.dim;
        self.grid
            .cells
            .iter()
            .map(|(k, c)| Seed {
                key: *k,
                start: c.centroid(dim)[..dim].to_vec(),
                count: c.count,
            })
            .collect()
    }

    /// Climbs one seed over the cell centroids.
    pub fn climb_seed(&self, seed: &Seed) -> Trajectory {
        climb(&seed.start, &self.grid, &self.cfg, self.params.tol, self.params.max_iter)
    }

    /// Merges seed end points, polishes the modes on the raw points and
    /// assigns every point. `ends` must be parallel to [`Self::seeds`].
    pub fn finish(self, seeds: &[Seed], ends: &[Trajectory]) -> Clustering {
        assert_eq!(seeds.len(), ends.len(), "one trajectory per seed");
        let metric = self.modality.metric();
        let unconverged_seeds = ends.iter().filter(|t| !t.converged).count();

        // Greedy merge, heaviest seeds first.
        let mut order: Vec<usize> = (0..seeds.len()).collect();
        order.sort_by(|&a, &b| seeds[b].count.cmp(&seeds[a].count).then(a.cmp(&b)));
        let mut modes: Vec<Mode> = Vec::new();
        let mut seed_mode = vec![0usize; seeds.len()];
        for &s in &order {
            let end = &ends[s].end;
            let nearest = nearest_within(&modes, end, self.params.merge_radius, metric);
            match nearest {
                Some(m) => {
                    absorb(&mut modes[m], end, seeds[s].count, metric);
                    seed_mode[s] = m;
                }
                None => {
                    seed_mode[s] = modes.len();
                    modes.push(Mode { center: end.clone(), population: seeds[s].count });
                }
            }
        }

        // Polish on the raw points, re-merging until the set is stable.
        let exact = self.grid.exact();
        let polish_tol = self.params.tol * POLISH_FACTOR;
        for _ in 0..MAX_MERGE_ROUNDS {
            for m in modes.iter_mut() {
                let t = climb(&m.center, &exact, &self.cfg, polish_tol, self.params.max_iter);
                m.center = t.end;
            }
            match merge_pass(&mut modes, self.params.merge_radius, metric) {
                Some(remap) => {
                    for sm in seed_mode.iter_mut() {
                        *sm = remap[*sm];
                    }
                }
                None => break,
            }
        }

        // Canonical order by coordinates.
        let mut perm: Vec<usize> = (0..modes.len()).collect();
        perm.sort_by(|&a, &b| cmp_coords(&modes[a].center, &modes[b].center).then(a.cmp(&b)));
        let mut rank = vec![0usize; modes.len()];
        for (new, &old) in perm.iter().enumerate() {
            rank[old] = new;
        }
        let seed_of_key: BTreeMap<CellKey, usize> =
            seeds.iter().enumerate().map(|(i, s)| (s.key, i)).collect();
        let mut assignments = vec![0usize; self.grid.len()];
        let mut population = vec![0u64; modes.len()];
        for (key, cell) in &self.grid.cells {
            let m = rank[seed_mode[seed_of_key[key]]];
            for &i in &cell.members {
                assignments[i as usize] = m;
            }
            population[m] += cell.count;
        }
        let modes = perm
            .into_iter()
            .enumerate()
            .map(|(new, old)| Mode {
                center: core::mem::take(&mut modes[old].center),
                population: population[new],
            })
            .collect();

        Clustering {
            model: ClusterModel {
                modality: self.modality,
                bandwidth: self.cfg.bandwidth,
                merge_radius: self.params.merge_radius,
                modes,
            },
            assignments,
            unconverged_seeds,
        }
    }
}

fn cmp_coords(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn nearest_within(modes: &[Mode], x: &[f64], radius: f64, metric: Metric) -> Option<usize> {
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for (i, m) in modes.iter().enumerate() {
        let d = metric.distance(&m.center, x);
        if d <= radius && d < best_d {
            best = Some(i);
            best_d = d;
        }
    }
    best
}

/// Population-weighted, wrap-aware running mean.
fn absorb(mode: &mut Mode, x: &[f64], count: u64, metric: Metric) {
    let total = mode.population + count;
    let frac = count as f64 / total as f64;
    for (c, &v) in mode.center.iter_mut().zip(x) {
        *c = metric.wrap(*c + frac * metric.delta(*c, v));
    }
    mode.population = total;
}

/// Collapses modes within `radius` of each other. Returns the old→new index
/// map if anything merged.
fn merge_pass(modes: &mut Vec<Mode>, radius: f64, metric: Metric) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..modes.len()).collect();
    order.sort_by(|&a, &b| modes[b].population.cmp(&modes[a].population).then(a.cmp(&b)));
    let mut merged: Vec<Mode> = Vec::with_capacity(modes.len());
    let mut remap = vec![0usize; modes.len()];
    for &i in &order {
        match nearest_within(&merged, &modes[i].center, radius, metric) {
            Some(m) => {
                let (center, pop) = (modes[i].center.clone(), modes[i].population);
                absorb(&mut merged[m], &center, pop, metric);
                remap[i] = m;
            }
            None => {
                remap[i] = merged.len();
                merged.push(modes[i].clone());
            }
        }
    }
    if merged.len() == modes.len() {
        return None;
    }
    *modes = merged;
    Some(remap)
}

/// Runs the full grid-accelerated mode search single-threaded.
pub fn find_modes(
    points: &[f64],
    modality: Modality,
    cfg: KernelConfig,
    params: ModeParams,
) -> Result<Clustering, ClusterError> {
    let search = ModeSearch::new(points, modality, cfg, params)?;
    let seeds = search.seeds();
    let ends: Vec<Trajectory> = seeds.iter().map(|s| search.climb_seed(s)).collect();
    Ok(search.finish(&seeds, &ends))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(h: f64) -> KernelConfig {
        KernelConfig::new(h, 1).unwrap()
    }

    fn exact_grid(points: &[f64], dim: usize) -> Grid {
        build_grid(points, dim, 1.0, Metric::Euclidean).unwrap()
    }

    #[test]
    fn kernel_values() {
        let k2 = KernelConfig::new(1.0, 2).unwrap();
        assert_eq!(k2.kernel_eval(&[0.0, 0.0]), 1.0);
        assert_eq!(line(1.0).kernel_eval(&[0.0]), 1.0);
        let v = k2.kernel_eval(&[core::f64::consts::SQRT_2, 0.0]);
        assert!((v - libm::exp(-1.0)).abs() < 1e-12);
        assert!(k2.kernel_eval(&[10.0, 5.0]) < k2.kernel_eval(&[1.0, 0.5]));
    }

    #[test]
    fn kernel_config_validation() {
        assert!(KernelConfig::new(0.0, 1).is_err());
        assert!(KernelConfig::new(f64::NAN, 1).is_err());
        assert!(KernelConfig::new(1.0, 3).is_err());
    }

    #[test]
    fn kde_examples() {
        let cfg = line(1.0);
        let one = exact_grid(&[0.0], 1);
        assert_eq!(kde(&[0.0], &one.exact(), &cfg).unwrap(), 1.0);
        let two = exact_grid(&[0.0, 0.0], 1);
        assert_eq!(kde(&[0.0], &two.exact(), &cfg).unwrap(), 1.0);
        let pm = exact_grid(&[-1.0, 1.0], 1);
        assert!((kde(&[0.0], &pm.exact(), &cfg).unwrap() - libm::exp(-0.5)).abs() < 1e-12);
        let empty = exact_grid(&[], 1);
        assert_eq!(kde(&[0.0], &empty.exact(), &cfg), Err(ClusterError::Empty));
    }

    #[test]
    fn step_examples() {
        let cfg = line(1.0);
        let pm = exact_grid(&[-1.0, 1.0], 1);
        let s = mean_shift_step(&[0.0], &pm.exact(), &cfg);
        assert!(s.next[0].abs() < 1e-15 && !s.underflow);

        let single = exact_grid(&[3.25], 1);
        let s = mean_shift_step(&[2.5], &single.exact(), &cfg);
        assert!((s.next[0] - 3.25).abs() < 1e-12);

        let far = exact_grid(&[1e6], 1);
        let s = mean_shift_step(&[0.0], &far.exact(), &cfg);
        assert!(s.underflow);
        assert_eq!(s.next, [0.0]);
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(&[0.1, 0.2], 1, 1.0, Metric::Euclidean).unwrap();
        assert_eq!(g.cells().len(), 1);
        let c = g.cells().values().next().unwrap();
        assert_eq!(c.count(), 2);
        assert!((c.sum(1)[0] - 0.3).abs() < 1e-15);
        assert_eq!(build_grid(&[0.1, 1.2], 1, 1.0, Metric::Euclidean).unwrap().cells().len(), 2);
        assert!(build_grid(&[], 1, 1.0, Metric::Euclidean).unwrap().cells().is_empty());
        assert!(build_grid(&[1.0], 1, 0.0, Metric::Euclidean).is_err());
        assert!(build_grid(&[1.0, 2.0, 3.0], 2, 1.0, Metric::Euclidean).is_err());
    }

    #[test]
    fn periodic_metric() {
        let m = Metric::Periodic { period: 86_400.0 };
        assert_eq!(m.delta(86_300.0, 1_000.0), 1_100.0);
        assert_eq!(m.delta(1_000.0, 86_300.0), -1_100.0);
        assert_eq!(m.wrap(-100.0), 86_300.0);
        assert_eq!(m.wrap(-1e-20), 0.0);
    }

    #[test]
    fn periodic_cluster_straddles_midnight() {
        let pts = [86_000.0, 86_300.0, 100.0, 400.0, 43_000.0];
        let c = find_modes(
            &pts,
            Modality::Time(TimeMapping::Day),
            line(1000.0),
            ModeParams::for_bandwidth(1000.0),
        )
        .unwrap();
        assert_eq!(c.model.len(), 2);
        assert_eq!(c.assignments[0], c.assignments[3]);
        assert_ne!(c.assignments[0], c.assignments[4]);
        let midnight = &c.model.modes[c.assignments[0]].center;
        assert!(Metric::Periodic { period: 86_400.0 }.distance(midnight, &[0.0]) < 300.0);
    }

    #[test]
    fn assign_rules() {
        let model = ClusterModel {
            modality: Modality::Time(TimeMapping::Day),
            bandwidth: 1000.0,
            merge_radius: 500.0,
            modes: vec![
                Mode { center: vec![1000.0], population: 1 },
                Mode { center: vec![3000.0], population: 1 },
            ],
        };
        assert_eq!(model.assign(&[3000.0]), 1);
        assert_eq!(model.assign(&[2000.0]), 0);
        assert_eq!(model.assign(&[86_300.0]), 0);
        assert_eq!(model.assign_timestamp(86_400 * 3 + 2900), Some(1));
        assert_eq!(model.assign_location(GeoPoint { lat: 0.0, lon: 0.0 }), None);
    }

    #[test]
    fn trivial_mode_sets() {
        let cfg = line(1.0);
        let p = ModeParams::for_bandwidth(1.0);
        let one = find_modes(&[4.2], Modality::Time(TimeMapping::Absolute), cfg, p).unwrap();
        assert_eq!(one.model.len(), 1);
        assert!((one.model.modes[0].center[0] - 4.2).abs() < 1e-12);
        for h in [0.01, 1.0, 100.0] {
            let same = find_modes(
                &[7.0; 20],
                Modality::Time(TimeMapping::Absolute),
                line(h),
                ModeParams::for_bandwidth(h),
            )
            .unwrap();
            assert_eq!(same.model.len(), 1);
            assert!((same.model.modes[0].center[0] - 7.0).abs() < 1e-12);
            assert_eq!(same.model.modes[0].population, 20);
        }
        assert_eq!(
            find_modes(&[], Modality::Space, KernelConfig::new(1.0, 2).unwrap(), p).unwrap_err(),
            ClusterError::Empty
        );
        assert!(find_modes(&[1.0, 2.0], Modality::Space, line(1.0), p).is_err());
    }

    #[test]
    fn modality_strings() {
        for m in [
            Modality::Space,
            Modality::Time(TimeMapping::Absolute),
            Modality::Time(TimeMapping::Day),
            Modality::Time(TimeMapping::Week),
        ] {
            let s = alloc::format!("{m}");
            assert_eq!(s.parse::<Modality>().unwrap(), m);
        }
        assert!("time:hour".parse::<Modality>().is_err());
    }
}
