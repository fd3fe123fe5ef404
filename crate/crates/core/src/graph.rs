//! Temporal graph data model.
//!
//! Times are normalized so that the shared observation span maps onto
//! `[0, 1]`. Walks carry *time budgets* `1 - t` rather than times, which is
//! the representation the generator and critic operate on.
//!
//! Normalized times are snapped to the dyadic grid `k / 2^53`. On that grid
//! `1 - t` is exact, so converting between times and budgets is lossless.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two generated contacts with the same endpoints closer than this in
/// normalized time are merged during assembly.
pub const DEDUP_TOLERANCE: f64 = 1e-6;

const GRID: f64 = 9_007_199_254_740_992.0; // 2^53

/// Snap a value in `[0, 1]` onto the `2^-53` grid.
#[inline]
pub fn snap(t: f64) -> f64 {
    (t * GRID).round() / GRID
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i)
    }
}

/// A directed contact `u -> v` at normalized time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub t: f64,
}

impl TemporalEdge {
    pub fn new(u: usize, v: usize, t: f64) -> Self {
        Self {
            u: NodeId(u),
            v: NodeId(v),
            t,
        }
    }

    pub fn to_budget_edge(&self) -> Result<BudgetEdge> {
        Ok(BudgetEdge {
            u: self.u,
            v: self.v,
            t_bar: to_budget(self.t)?,
        })
    }
}

/// A directed contact stamped with its remaining time budget `1 - t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub t_bar: f64,
}

impl BudgetEdge {
    pub fn new(u: usize, v: usize, t_bar: f64) -> Self {
        Self {
            u: NodeId(u),
            v: NodeId(v),
            t_bar,
        }
    }

    pub fn to_temporal_edge(&self) -> Result<TemporalEdge> {
        Ok(TemporalEdge {
            u: self.u,
            v: self.v,
            t: from_budget(self.t_bar)?,
        })
    }
}

fn check_unit(x: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Range(format!("{what} {x} outside [0, 1]")));
    }
    Ok(())
}

/// Convert a normalized time into its time budget.
pub fn to_budget(t: f64) -> Result<f64> {
    check_unit(t, "time")?;
    Ok(1.0 - snap(t))
}

/// Inverse of [`to_budget`].
pub fn from_budget(t_bar: f64) -> Result<f64> {
    check_unit(t_bar, "time budget")?;
    Ok(1.0 - snap(t_bar))
}

/// A set of contacts over the shared normalized span `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalGraphSample {
    pub n_nodes: usize,
    /// Sorted by `t`, non-decreasing.
    pub edges: Vec<TemporalEdge>,
    /// Length of the raw observation span that was mapped onto `[0, 1]`.
    pub t_end_raw: f64,
}

impl TemporalGraphSample {
    /// Build a sample from normalized edges. Edges are stably sorted by time.
    pub fn new(n_nodes: usize, mut edges: Vec<TemporalEdge>, t_end_raw: f64) -> Result<Self> {
        if !(t_end_raw.is_finite() && t_end_raw > 0.0) {
            return Err(Error::Range(format!("t_end_raw must be positive, got {t_end_raw}")));
        }
        for (i, e) in edges.iter().enumerate() {
            if !(0.0..=1.0).contains(&e.t) {
                return Err(Error::Range(format!(
                    "edge {i} ({} -> {}) has normalized time {} outside [0, 1]",
                    e.u, e.v, e.t
                )));
            }
            if e.u.0 >= n_nodes || e.v.0 >= n_nodes {
                return Err(Error::Range(format!(
                    "edge {i} ({} -> {}) references a node outside 0..{n_nodes}",
                    e.u, e.v
                )));
            }
        }
        edges.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self {
            n_nodes,
            edges,
            t_end_raw,
        })
    }

    pub fn empty(n_nodes: usize, t_end_raw: f64) -> Self {
        Self {
            n_nodes,
            edges: Vec::new(),
            t_end_raw,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn self_loop_count(&self) -> usize {
        self.edges.iter().filter(|e| e.u == e.v).count()
    }

    /// Edges with timestamps mapped back onto the raw span.
    pub fn denormalized(&self) -> Vec<TemporalEdge> {
        self.edges
            .iter()
            .map(|e| TemporalEdge {
                t: e.t * self.t_end_raw,
                ..*e
            })
            .collect()
    }

    /// Checks every structural invariant; used by property tests.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, e) in self.edges.iter().enumerate() {
            check_unit(e.t, "time")?;
            if e.u.0 >= self.n_nodes || e.v.0 >= self.n_nodes {
                return Err(Error::Range(format!("edge {i} node outside universe")));
            }
            if i > 0 && self.edges[i - 1].t > e.t {
                return Err(Error::Range(format!("edge {i} out of time order")));
            }
        }
        Ok(())
    }
}

/// Map raw timestamps in `[0, t_end_raw]` onto `[0, 1]`.
pub fn normalize_times(
    n_nodes: usize,
    raw_edges: &[TemporalEdge],
    t_end_raw: f64,
) -> Result<TemporalGraphSample> {
    if !(t_end_raw.is_finite() && t_end_raw > 0.0) {
        return Err(Error::Range(format!("t_end_raw must be positive, got {t_end_raw}")));
    }
    let mut edges = Vec::with_capacity(raw_edges.len());
    for (i, e) in raw_edges.iter().enumerate() {
        if !(e.t >= 0.0 && e.t <= t_end_raw) {
            return Err(Error::Range(format!(
                "edge {i} ({} -> {}) has timestamp {} outside [0, {t_end_raw}]",
                e.u, e.v, e.t
            )));
        }
        edges.push(TemporalEdge {
            t: snap(e.t / t_end_raw).min(1.0),
            ..*e
        });
    }
    TemporalGraphSample::new(n_nodes, edges, t_end_raw)
}

/// A collection of samples over a shared node universe and span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<TemporalGraphSample>,
    pub n_nodes: usize,
    pub t_end_raw: f64,
}

impl Dataset {
    pub fn new(samples: Vec<TemporalGraphSample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Empty("dataset has no samples".into()))?;
        let (n_nodes, t_end_raw) = (first.n_nodes, first.t_end_raw);
        for (i, s) in samples.iter().enumerate() {
            if s.n_nodes != n_nodes || s.t_end_raw != t_end_raw {
                return Err(Error::Config(format!(
                    "sample {i} has universe {} / span {} but dataset uses {n_nodes} / {t_end_raw}",
                    s.n_nodes, s.t_end_raw
                )));
            }
        }
        Ok(Self {
            samples,
            n_nodes,
            t_end_raw,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_edge_count(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.len()).sum::<usize>() as f64 / self.samples.len() as f64
    }

    /// Seeded shuffle of sample indices, then `floor(ratio * n)` go to the
    /// first part. Both parts are kept non-empty.
    pub fn split(&self, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Config(format!("split ratio {ratio} not in (0, 1)")));
        }
        let n = self.samples.len();
        if n < 2 {
            return Err(Error::Empty(format!("cannot split {n} sample(s)")));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = ((n as f64 * ratio + 1e-9).floor() as usize).clamp(1, n - 1);
        let pick = |ids: &[usize]| Dataset {
            samples: ids.iter().map(|&i| self.samples[i].clone()).collect(),
            n_nodes: self.n_nodes,
            t_end_raw: self.t_end_raw,
        };
        Ok((pick(&idx[..n_train]), pick(&idx[n_train..])))
    }
}

/// Profile of a truncated walk: initial flag, final flag and entry budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkProfile {
    pub x: u8,
    pub y: u8,
    pub t0_bar: f64,
}

/// A piece of a temporal walk of bounded length together with its profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedWalk {
    pub profile: WalkProfile,
    pub edges: Vec<BudgetEdge>,
    /// Indices `i >= 1` of edges reached through a teleport jump, where
    /// `edges[i - 1].v != edges[i].u` is allowed.
    #[serde(default)]
    pub jumps: Vec<usize>,
}

/// A whole temporal walk.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TemporalWalk {
    pub edges: Vec<BudgetEdge>,
}

/// Common view over walk types for validation.
pub trait Walk {
    fn edges(&self) -> &[BudgetEdge];

    /// Entry budget bounding the first edge, if any.
    fn entry_budget(&self) -> Option<f64> {
        None
    }

    fn jumps(&self) -> &[usize] {
        &[]
    }
}

impl Walk for TemporalWalk {
    fn edges(&self) -> &[BudgetEdge] {
        &self.edges
    }
}

impl Walk for TruncatedWalk {
    fn edges(&self) -> &[BudgetEdge] {
        &self.edges
    }

    fn entry_budget(&self) -> Option<f64> {
        Some(self.profile.t0_bar)
    }

    fn jumps(&self) -> &[usize] {
        &self.jumps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// Budgets lie in `[0, 1]` and never increase along the walk.
    pub time_valid: bool,
    /// Consecutive edges share an endpoint, except across recorded jumps.
    pub connected: bool,
    /// Budgets lie in `[0, 1]` and node ids fall inside the universe.
    pub in_range: bool,
    pub first_violation_index: Option<usize>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.time_valid && self.connected && self.in_range
    }
}

/// Check the temporal validity constraints of a walk. Violations are
/// reported, never raised. Node ids are range-checked when `n_nodes` is
/// given.
pub fn validate_walk<W: Walk + ?Sized>(walk: &W, n_nodes: Option<usize>) -> ValidityReport {
    let edges = walk.edges();
    let jumps = walk.jumps();
    let unit = |x: f64| (0.0..=1.0).contains(&x);

    let mut time_valid = true;
    let mut connected = true;
    let mut in_range = !edges.is_empty();
    let mut first: Option<usize> = if edges.is_empty() { Some(0) } else { None };
    let flag = |i: usize, first: &mut Option<usize>| {
        if first.is_none() {
            *first = Some(i);
        }
    };

    let mut prev = walk.entry_budget();
    if let Some(t0) = prev {
        if !unit(t0) {
            time_valid = false;
            in_range = false;
            flag(0, &mut first);
        }
    }
    for (i, e) in edges.iter().enumerate() {
        if !unit(e.t_bar) {
            time_valid = false;
            in_range = false;
            flag(i, &mut first);
        }
        if let Some(n) = n_nodes {
            if e.u.0 >= n || e.v.0 >= n {
                in_range = false;
                flag(i, &mut first);
            }
        }
        if let Some(p) = prev {
            if e.t_bar > p {
                time_valid = false;
                flag(i, &mut first);
            }
        }
        if i > 0 && edges[i - 1].v != e.u && !jumps.contains(&i) {
            connected = false;
            flag(i, &mut first);
        }
        prev = Some(e.t_bar);
    }
    ValidityReport {
        time_valid,
        connected,
        in_range,
        first_violation_index: first,
    }
}

/// Binary adjacency matrices over equal-width time bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSequence {
    pub n_nodes: usize,
    pub n_bins: usize,
    pub t_end_raw: f64,
    /// `mats[k][u * n_nodes + v]` is 1 when `u -> v` occurs in bin `k`.
    pub mats: Vec<Vec<u8>>,
}

impl SnapshotSequence {
    #[inline]
    pub fn get(&self, bin: usize, u: usize, v: usize) -> bool {
        self.mats[bin][u * self.n_nodes + v] != 0
    }

    pub fn nonzero_count(&self) -> usize {
        self.mats
            .iter()
            .map(|m| m.iter().filter(|&&x| x != 0).count())
            .sum()
    }
}

/// Bin index of a normalized time; `t = 1` falls into the last bin.
#[inline]
pub fn bin_of(t: f64, n_bins: usize) -> usize {
    ((t * n_bins as f64).floor() as usize).min(n_bins - 1)
}

pub fn to_snapshots(sample: &TemporalGraphSample, n_bins: usize) -> Result<SnapshotSequence> {
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be at least 1".into()));
    }
    let n = sample.n_nodes;
    let mut mats = vec![vec![0u8; n * n]; n_bins];
    for e in &sample.edges {
        mats[bin_of(e.t, n_bins)][e.u.0 * n + e.v.0] = 1;
    }
    Ok(SnapshotSequence {
        n_nodes: n,
        n_bins,
        t_end_raw: sample.t_end_raw,
        mats,
    })
}

/// Place every snapshot entry at the midpoint of its bin.
pub fn recover_continuous(snaps: &SnapshotSequence) -> TemporalGraphSample {
    let n = snaps.n_nodes;
    let mut edges = Vec::with_capacity(snaps.nonzero_count());
    for (k, m) in snaps.mats.iter().enumerate() {
        let t = (k as f64 + 0.5) / snaps.n_bins as f64;
        for (idx, _) in m.iter().enumerate().filter(|(_, &x)| x != 0) {
            edges.push(TemporalEdge::new(idx / n, idx % n, t));
        }
    }
    TemporalGraphSample {
        n_nodes: n,
        edges,
        t_end_raw: snaps.t_end_raw,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblySpec {
    pub n_nodes: usize,
    pub t_end_raw: f64,
    /// Keep at most this many edges, in generation order.
    pub target_edges: Option<usize>,
    /// Discard walks whose consecutive edges do not share endpoints.
    pub require_connected: bool,
}

impl AssemblySpec {
    pub fn new(n_nodes: usize, t_end_raw: f64) -> Self {
        Self {
            n_nodes,
            t_end_raw,
            target_edges: None,
            require_connected: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assembly {
    pub sample: TemporalGraphSample,
    pub walks_total: usize,
    pub walks_kept: usize,
    pub time_invalid: usize,
    pub disconnected: usize,
    pub out_of_range: usize,
    pub duplicates_merged: usize,
}

impl Assembly {
    pub fn discard_rate(&self) -> f64 {
        if self.walks_total == 0 {
            return 0.0;
        }
        (self.walks_total - self.walks_kept) as f64 / self.walks_total as f64
    }
}

/// Merge walks into a single graph sample.
///
/// Invalid walks are dropped whole. Surviving edges are converted back to
/// times, deduplicated, capped in generation order and finally sorted.
pub fn assemble(walks: &[TemporalWalk], spec: &AssemblySpec) -> Result<Assembly> {
    if spec.target_edges == Some(0) {
        return Err(Error::Config("target_edges must be at least 1".into()));
    }
    let mut time_invalid = 0;
    let mut disconnected = 0;
    let mut out_of_range = 0;
    let mut kept = 0;
    let mut seen: HashMap<(NodeId, NodeId), Vec<f64>> = HashMap::new();
    let mut edges = Vec::new();
    let mut duplicates = 0;
    let cap = spec.target_edges.unwrap_or(usize::MAX);

    for w in walks {
        let report = validate_walk(w, Some(spec.n_nodes));
        if !report.in_range {
            out_of_range += 1;
            continue;
        }
        if !report.time_valid {
            time_invalid += 1;
            continue;
        }
        if spec.require_connected && !report.connected {
            disconnected += 1;
            continue;
        }
        kept += 1;
        for be in &w.edges {
            if edges.len() >= cap {
                break;
            }
            let e = be.to_temporal_edge()?;
            let times = seen.entry((e.u, e.v)).or_default();
            if times.iter().any(|&t| (t - e.t).abs() < DEDUP_TOLERANCE) {
                duplicates += 1;
                continue;
            }
            times.push(e.t);
            edges.push(e);
        }
    }
    if kept == 0 {
        return Err(Error::AllWalksDiscarded {
            total: walks.len(),
            time_invalid,
            disconnected,
            out_of_range,
        });
    }
    let sample = TemporalGraphSample::new(spec.n_nodes, edges, spec.t_end_raw)?;
    Ok(Assembly {
        sample,
        walks_total: walks.len(),
        walks_kept: kept,
        time_invalid,
        disconnected,
        out_of_range,
        duplicates_merged: duplicates,
    })
}
