//! Distances between sets of temporal graphs.
//!
//! Each graph sample is summarised by fourteen measures, seven on the
//! contact sequence and seven on its snapshots. Two sets of samples are
//! compared measure by measure with [`mmd`].

mod continuous;
mod mmd;
mod snapshot;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{to_snapshots, TemporalEdge, TemporalGraphSample};

pub use continuous::{average_degree, continuous_measures, ContinuousMeasures};
pub use mmd::{median_bandwidth, mmd, Kernel};
pub use snapshot::{betweenness, broadcast_receive, burstiness, closeness, node_correlation, snapshot_measures, SnapshotMeasures};

/// Measure names in report order.
pub const MEASURES: [&str; 14] = [
    "average_degree",
    "mean_average_degree",
    "group_size",
    "average_group_size",
    "mean_group_number",
    "mean_coordination_number",
    "mean_group_duration",
    "betweenness_centrality",
    "closeness_centrality",
    "broadcast_centrality",
    "receive_centrality",
    "burstiness",
    "node_temporal_correlation",
    "temporal_correlation",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_bins: usize,
    /// Contact duration; one bin width when unset.
    pub delta: Option<f64>,
    /// Instants at which group statistics are read.
    pub grid: usize,
    pub kernel: Kernel,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_bins: 10,
            delta: None,
            grid: 200,
            kernel: Kernel::RbfMedianHeuristic,
        }
    }
}

impl EvalConfig {
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(1.0 / self.n_bins as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::Config("n_bins must be at least 2".into()));
        }
        if self.grid == 0 {
            return Err(Error::Config("grid must be positive".into()));
        }
        if !(self.delta() > 0.0 && self.delta().is_finite()) {
            return Err(Error::Config(format!("delta {} must be positive", self.delta())));
        }
        if let Kernel::RbfFixed(s) = self.kernel {
            if !(s > 0.0) {
                return Err(Error::Config(format!("kernel bandwidth {s} must be positive")));
            }
        }
        Ok(())
    }
}

/// All fourteen measures of one sample, scalars as length-one vectors, in
/// [`MEASURES`] order.
pub fn measure_vectors(sample: &TemporalGraphSample, cfg: &EvalConfig) -> Result<Vec<Option<Vec<f64>>>> {
    let c = continuous_measures(sample, cfg.delta(), cfg.grid);
    let s = snapshot_measures(&to_snapshots(sample, cfg.n_bins)?);
    Ok(vec![
        Some(c.average_degree),
        Some(vec![c.mean_average_degree]),
        Some(c.group_size),
        Some(vec![c.average_group_size]),
        Some(vec![c.mean_group_number]),
        Some(vec![c.mean_coordination_number]),
        Some(vec![c.mean_group_duration]),
        Some(s.betweenness),
        Some(s.closeness),
        Some(s.broadcast),
        Some(s.receive),
        Some(s.burstiness),
        s.node_temporal_correlation,
        s.temporal_correlation.map(|c| vec![c]),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub measure: String,
    /// `None` when one side has no sample on which the measure is defined.
    pub mmd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub format_version: u32,
    pub entries: Vec<MetricEntry>,
}

impl MetricReport {
    pub fn get(&self, measure: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.measure == measure).and_then(|e| e.mmd)
    }

    /// `measure,mmd` rows; missing values are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure,mmd\n");
        for e in &self.entries {
            match e.mmd {
                Some(v) => out.push_str(&format!("{},{v:e}\n", e.measure)),
                None => out.push_str(&format!("{},\n", e.measure)),
            }
        }
        out
    }
}

fn check_sets(real: &[TemporalGraphSample], generated: &[TemporalGraphSample]) -> Result<()> {
    if real.is_empty() || generated.is_empty() {
        return Err(Error::Empty("evaluation needs samples on both sides".into()));
    }
    let n = real[0].n_nodes;
    if let Some(s) = real.iter().chain(generated).find(|s| s.n_nodes != n) {
        return Err(Error::Dimension(format!("sample over {} nodes among samples over {n}", s.n_nodes)));
    }
    Ok(())
}

fn mmd_defined(x: &[Option<Vec<f64>>], y: &[Option<Vec<f64>>], kernel: Kernel) -> Result<Option<f64>> {
    let x: Vec<Vec<f64>> = x.iter().flatten().cloned().collect();
    let y: Vec<Vec<f64>> = y.iter().flatten().cloned().collect();
    if x.is_empty() || y.is_empty() {
        return Ok(None);
    }
    mmd(&x, &y, kernel).map(Some)
}

/// Per-measure distances between two sets of samples over one node universe.
pub fn evaluate(
    real: &[TemporalGraphSample],
    generated: &[TemporalGraphSample],
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    check_sets(real, generated)?;
    let features = |set: &[TemporalGraphSample]| -> Result<Vec<Vec<Option<Vec<f64>>>>> {
        set.iter().map(|s| measure_vectors(s, cfg)).collect()
    };
    let (fr, fg) = (features(real)?, features(generated)?);
    let column = |f: &[Vec<Option<Vec<f64>>>], m: usize| f.iter().map(|row| row[m].clone()).collect::<Vec<_>>();
    let entries = MEASURES
        .iter()
        .enumerate()
        .map(|(m, name)| {
            Ok(MetricEntry {
                measure: name.to_string(),
                mmd: mmd_defined(&column(&fr, m), &column(&fg, m), cfg.kernel)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        format_version: 1,
        entries,
    })
}

/// Distance on the average-degree measure alone.
pub fn average_degree_mmd(real: &[TemporalGraphSample], generated: &[TemporalGraphSample], cfg: &EvalConfig) -> Result<f64> {
    cfg.validate()?;
    check_sets(real, generated)?;
    let f = |set: &[TemporalGraphSample]| set.iter().map(|s| average_degree(s, cfg.delta())).collect::<Vec<_>>();
    mmd(&f(real), &f(generated), cfg.kernel)
}

/// Same contacts with their timestamps permuted at random.
pub fn shuffle_times<R: Rng + ?Sized>(sample: &TemporalGraphSample, rng: &mut R) -> TemporalGraphSample {
    let mut times: Vec<f64> = sample.edges.iter().map(|e| e.t).collect();
    times.shuffle(rng);
    let edges: Vec<TemporalEdge> = sample
        .edges
        .iter()
        .zip(times)
        .map(|(e, t)| TemporalEdge { t, ..*e })
        .collect();
    TemporalGraphSample::new(sample.n_nodes, edges, sample.t_end_raw).expect("permuted times stay in range")
}
