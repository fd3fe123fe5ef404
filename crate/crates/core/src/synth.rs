//! Continuous-time directed scale-free graph simulator.
//!
//! Each step adds one directed edge in one of three ways: a new source node
//! attaching to an existing target (probability `alpha`), an edge between two
//! existing nodes (`beta`), or an existing source attaching to a new target
//! (`gamma`). Existing targets are chosen with weight `in_degree + delta_in`,
//! existing sources with `out_degree + delta_out`. Every edge is stamped with
//! the cumulative elapsed time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_times, Dataset, TemporalEdge, TemporalGraphSample};

const SEED_NODES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_nodes_target: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta_in: f64,
    pub delta_out: f64,
    /// Shared raw time span; also the cap on elapsed time.
    pub max_time_raw: f64,
    pub n_samples: usize,
    /// Stop at this many edges instead of `n_nodes_target`.
    pub max_edges: Option<usize>,
    /// Use the event-type draw as the time increment as well.
    pub reuse_draw: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_nodes_target: 100,
            alpha: 0.41,
            beta: 0.54,
            gamma: 0.05,
            delta_in: 0.2,
            delta_out: 0.0,
            max_time_raw: 100.0,
            n_samples: 200,
            max_edges: None,
            reuse_draw: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let p = [self.alpha, self.beta, self.gamma];
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::Config("alpha, beta, gamma must lie in [0, 1]".into()));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "alpha + beta + gamma = {} must equal 1",
                p.iter().sum::<f64>()
            )));
        }
        if self.delta_in < 0.0 || self.delta_out < 0.0 {
            return Err(Error::Config("delta_in and delta_out must be non-negative".into()));
        }
        if !(self.max_time_raw > 0.0 && self.max_time_raw.is_finite()) {
            return Err(Error::Config("max_time_raw must be positive".into()));
        }
        if self.n_nodes_target == 0 {
            return Err(Error::Config("n_nodes_target must be positive".into()));
        }
        Ok(())
    }

    fn target_edges(&self) -> usize {
        self.max_edges.unwrap_or(self.n_nodes_target)
    }

    /// Upper bound of the per-step time increment.
    pub fn time_step(&self) -> f64 {
        self.max_time_raw / self.n_nodes_target as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthState {
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
    /// Edges with raw cumulative timestamps, in construction order.
    pub edges: Vec<TemporalEdge>,
    pub elapsed: f64,
}

impl SynthState {
    /// Three nodes in a directed cycle at time zero.
    pub fn seed() -> Self {
        let mut s = Self {
            in_degree: vec![0; SEED_NODES],
            out_degree: vec![0; SEED_NODES],
            edges: Vec::new(),
            elapsed: 0.0,
        };
        for u in 0..SEED_NODES {
            s.push_edge(u, (u + 1) % SEED_NODES, 0.0);
        }
        s
    }

    pub fn n_nodes(&self) -> usize {
        self.in_degree.len()
    }

    fn add_node(&mut self) -> usize {
        self.in_degree.push(0);
        self.out_degree.push(0);
        self.in_degree.len() - 1
    }

    fn push_edge(&mut self, u: usize, v: usize, t: f64) {
        self.out_degree[u] += 1;
        self.in_degree[v] += 1;
        self.edges.push(TemporalEdge::new(u, v, t));
    }
}

fn choose<R: Rng + ?Sized>(degree: &[usize], delta: f64, rng: &mut R) -> usize {
    let total: f64 = degree.iter().map(|&d| d as f64 + delta).sum();
    if total <= 0.0 {
        return rng.random_range(0..degree.len());
    }
    let r = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &d) in degree.iter().enumerate() {
        acc += d as f64 + delta;
        if r < acc {
            return i;
        }
    }
    degree.len() - 1
}

/// The event drawn for one step, before it is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    NewSource,
    Internal,
    NewTarget,
}

/// Advance the simulation by one edge. Returns `false` without changing the
/// state when the next timestamp would exceed `max_time_raw`.
pub fn step<R: Rng + ?Sized>(state: &mut SynthState, cfg: &SynthConfig, rng: &mut R) -> bool {
    let draw: f64 = rng.random();
    let increment = if cfg.reuse_draw {
        draw * cfg.time_step()
    } else {
        rng.random::<f64>() * cfg.time_step()
    };
    let t = state.elapsed + increment;
    if t > cfg.max_time_raw {
        return false;
    }
    let event = if draw <= cfg.alpha {
        Event::NewSource
    } else if draw <= cfg.alpha + cfg.beta {
        Event::Internal
    } else {
        Event::NewTarget
    };
    let (u, v) = match event {
        Event::NewSource => {
            let v = choose(&state.in_degree, cfg.delta_in, rng);
            (state.add_node(), v)
        }
        Event::Internal => {
            let u = choose(&state.out_degree, cfg.delta_out, rng);
            let v = choose(&state.in_degree, cfg.delta_in, rng);
            (u, v)
        }
        Event::NewTarget => {
            let u = choose(&state.out_degree, cfg.delta_out, rng);
            (u, state.add_node())
        }
    };
    state.elapsed = t;
    state.push_edge(u, v, t);
    true
}

/// Simulate until the edge target or the time cap is reached.
pub fn generate_raw<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<SynthState> {
    cfg.validate()?;
    let mut state = SynthState::seed();
    while state.edges.len() < cfg.target_edges() {
        if !step(&mut state, cfg, rng) {
            break;
        }
    }
    Ok(state)
}

pub fn generate_sample<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<TemporalGraphSample> {
    let state = generate_raw(cfg, rng)?;
    normalize_times(state.n_nodes(), &state.edges, cfg.max_time_raw)
}

/// Independent samples over a shared universe sized by the largest sample.
/// Each sample draws from its own stream seeded by the master rng.
pub fn generate_dataset<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<Dataset> {
    if cfg.n_samples == 0 {
        return Err(Error::Empty("n_samples must be positive".into()));
    }
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.n_samples).map(|_| rng.random()).collect();
    let mut samples = seeds
        .into_iter()
        .map(|s| generate_sample(cfg, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect::<Result<Vec<_>>>()?;
    let universe = samples.iter().map(|s| s.n_nodes).max().unwrap_or(SEED_NODES);
    for s in &mut samples {
        s.n_nodes = universe;
    }
    Dataset::new(samples)
}
