//! Truncated temporal random walk sampling from observed graphs.
//!
//! A walk starts at an edge drawn from a start distribution biased towards
//! early edges, then repeatedly moves to a strictly later edge leaving the
//! current target node, weighted by exponential decay in elapsed time. A
//! small teleport mass lets the walk jump to strictly later edges elsewhere
//! in the graph, which keeps walks from dying in sparse regions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BudgetEdge, Dataset, TemporalGraphSample, TruncatedWalk, WalkProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StartBias {
    #[default]
    Uniform,
    Linear,
    Exponential,
}

impl std::str::FromStr for StartBias {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "linear" => Ok(Self::Linear),
            "exponential" => Ok(Self::Exponential),
            other => Err(Error::Config(format!("unknown start bias {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Maximum number of edges in a truncated walk.
    pub max_len: usize,
    pub start_bias: StartBias,
    /// Teleport mass spread over strictly later, non-adjacent edges.
    pub jump_epsilon: f64,
    /// Decay rate of the continuation weights in elapsed normalized time.
    pub decay_lambda: f64,
    /// Weight start edges by raw normalized time instead of time budget.
    pub bias_on_raw_time: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            max_len: 3,
            start_bias: StartBias::Linear,
            jump_epsilon: 1e-3,
            decay_lambda: 1.0,
            bias_on_raw_time: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=20).contains(&self.max_len) {
            return Err(Error::Config(format!("walk length {} not in 1..=20", self.max_len)));
        }
        if !(self.jump_epsilon >= 0.0 && self.jump_epsilon.is_finite()) {
            return Err(Error::Config("jump_epsilon must be non-negative".into()));
        }
        if !(self.decay_lambda > 0.0 && self.decay_lambda.is_finite()) {
            return Err(Error::Config("decay_lambda must be positive".into()));
        }
        Ok(())
    }
}

/// Per-node adjacency of one sample: out- and in-edge indices sorted by time.
#[derive(Debug, Clone)]
pub struct EdgeIndex {
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl EdgeIndex {
    pub fn new(sample: &TemporalGraphSample) -> Self {
        let mut out_edges = vec![Vec::new(); sample.n_nodes];
        let mut in_edges = vec![Vec::new(); sample.n_nodes];
        for (i, e) in sample.edges.iter().enumerate() {
            out_edges[e.u.0].push(i);
            in_edges[e.v.0].push(i);
        }
        Self {
            out_edges,
            in_edges,
        }
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }
}

/// Start-edge distribution of a sample.
pub fn start_probs(sample: &TemporalGraphSample, bias: StartBias, raw_time: bool) -> Result<Vec<f64>> {
    let n = sample.edges.len();
    if n == 0 {
        return Err(Error::Empty("sample has no edges".into()));
    }
    let key = |t: f64| if raw_time { t } else { 1.0 - t };
    let uniform = vec![1.0 / n as f64; n];
    let weights: Vec<f64> = match bias {
        StartBias::Uniform => return Ok(uniform),
        StartBias::Linear => sample.edges.iter().map(|e| key(e.t)).collect(),
        StartBias::Exponential => {
            // Shift by the maximum for stability; the ratio is unchanged.
            let m = sample.edges.iter().map(|e| key(e.t)).fold(f64::MIN, f64::max);
            sample.edges.iter().map(|e| (key(e.t) - m).exp()).collect()
        }
    };
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Ok(uniform);
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// One possible continuation of a walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub edge: usize,
    pub prob: f64,
    pub teleport: bool,
}

/// Continuation distribution from edge `current` of `sample`.
///
/// An empty result means no strictly later edge can be reached and the walk
/// ends there.
pub fn next_probs(
    sample: &TemporalGraphSample,
    index: &EdgeIndex,
    current: usize,
    cfg: &SamplerConfig,
) -> Vec<Candidate> {
    let cur = sample.edges[current];
    let later_start = sample.edges.partition_point(|e| e.t <= cur.t);
    let n_later = sample.edges.len() - later_start;

    let adjacent: Vec<usize> = index
        .out_edges(cur.v.0)
        .iter()
        .copied()
        .filter(|&j| sample.edges[j].t > cur.t)
        .collect();
    let n_teleport = n_later - adjacent.len();
    let eps = if n_teleport > 0 { cfg.jump_epsilon } else { 0.0 };
    let adj_mass = if adjacent.is_empty() { 0.0 } else { 1.0 };
    let alpha = adj_mass + eps;
    if alpha <= 0.0 {
        return Vec::new();
    }

    let mut out = Vec::with_capacity(adjacent.len() + n_teleport);
    if !adjacent.is_empty() {
        let w: Vec<f64> = adjacent
            .iter()
            .map(|&j| (-cfg.decay_lambda * (sample.edges[j].t - cur.t)).exp())
            .collect();
        let total: f64 = w.iter().sum();
        out.extend(adjacent.iter().zip(&w).map(|(&j, &wj)| Candidate {
            edge: j,
            prob: wj / total / alpha,
            teleport: false,
        }));
    }
    if eps > 0.0 {
        let p = eps / n_teleport as f64 / alpha;
        out.extend(
            (later_start..sample.edges.len())
                .filter(|&j| sample.edges[j].u != cur.v)
                .map(|j| Candidate {
                    edge: j,
                    prob: p,
                    teleport: true,
                }),
        );
    }
    out
}

fn draw<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("non-empty distribution");
    let r = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1)
}

fn cumulative(p: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    p.into_iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Samples truncated walks from a normalized dataset.
#[derive(Debug, Clone)]
pub struct WalkSampler<'a> {
    dataset: &'a Dataset,
    cfg: SamplerConfig,
    indices: Vec<EdgeIndex>,
    start_cdf: Vec<Vec<f64>>,
    non_empty: Vec<usize>,
}

impl<'a> WalkSampler<'a> {
    pub fn new(dataset: &'a Dataset, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let non_empty: Vec<usize> = (0..dataset.samples.len())
            .filter(|&i| !dataset.samples[i].is_empty())
            .collect();
        if non_empty.is_empty() {
            return Err(Error::Empty("dataset has no edges to sample walks from".into()));
        }
        let indices = dataset.samples.iter().map(EdgeIndex::new).collect();
        let start_cdf = dataset
            .samples
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(Vec::new())
                } else {
                    start_probs(s, cfg.start_bias, cfg.bias_on_raw_time).map(cumulative)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dataset,
            cfg,
            indices,
            start_cdf,
            non_empty,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn index(&self, sample: usize) -> &EdgeIndex {
        &self.indices[sample]
    }

    /// Draw a sample uniformly, a start edge from its start distribution,
    /// then extend the walk.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TruncatedWalk {
        let d = self.non_empty[rng.random_range(0..self.non_empty.len())];
        let start = draw(&self.start_cdf[d], rng);
        self.sample_from(d, start, rng)
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<TruncatedWalk> {
        (0..batch_size).map(|_| self.sample(rng)).collect()
    }

    /// Walk from a fixed start edge of sample `d`.
    pub fn sample_from<R: Rng + ?Sized>(&self, d: usize, start: usize, rng: &mut R) -> TruncatedWalk {
        let sample = &self.dataset.samples[d];
        let index = &self.indices[d];
        let budget = |i: usize| 1.0 - sample.edges[i].t;
        let as_budget = |i: usize| {
            let e = sample.edges[i];
            BudgetEdge {
                u: e.u,
                v: e.v,
                t_bar: budget(i),
            }
        };

        // The latest strictly earlier contact into the start's source could
        // have carried a walk here; its budget becomes the entry budget.
        let t_start = sample.edges[start].t;
        let predecessor = index
            .in_edges(sample.edges[start].u.0)
            .iter()
            .copied()
            .filter(|&j| sample.edges[j].t < t_start)
            .max_by(|&a, &b| sample.edges[a].t.total_cmp(&sample.edges[b].t));
        let (x, t0_bar) = match predecessor {
            Some(j) => (0, budget(j)),
            None => (1, 1.0),
        };

        let mut edges = vec![as_budget(start)];
        let mut jumps = Vec::new();
        let mut current = start;
        let mut ended = false;
        while edges.len() < self.cfg.max_len {
            let cands = next_probs(sample, index, current, &self.cfg);
            if cands.is_empty() {
                ended = true;
                break;
            }
            let cdf = cumulative(cands.iter().map(|c| c.prob));
            let pick = cands[draw(&cdf, rng)];
            if pick.teleport {
                jumps.push(edges.len());
            }
            edges.push(as_budget(pick.edge));
            current = pick.edge;
        }
        if !ended {
            ended = next_probs(sample, index, current, &self.cfg).is_empty();
        }
        TruncatedWalk {
            profile: WalkProfile {
                x,
                y: u8::from(ended),
                t0_bar,
            },
            edges,
            jumps,
        }
    }
}
