//! Measures on the contact sequence itself. Every contact is live on
//! `[t, t + delta]`; group statistics are read off the undirected graph of
//! live contacts at `grid` evenly spaced instants `(k + 1/2) / grid`.

use std::collections::HashMap;

use crate::graph::TemporalGraphSample;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousMeasures {
    /// Contacts per node divided by the node's active span.
    pub average_degree: Vec<f64>,
    pub mean_average_degree: f64,
    /// Share of groups of each size `1..=n_nodes`, pooled over the grid.
    pub group_size: Vec<f64>,
    pub average_group_size: f64,
    pub mean_group_number: f64,
    pub mean_coordination_number: f64,
    pub mean_group_duration: f64,
}

/// Per-node contact rate. A node's active span runs from its first contact
/// to the end of the window, floored at `delta`; silent nodes score 0.
pub fn average_degree(sample: &TemporalGraphSample, delta: f64) -> Vec<f64> {
    let n = sample.n_nodes;
    let mut count = vec![0usize; n];
    let mut first = vec![f64::INFINITY; n];
    for e in &sample.edges {
        for x in [e.u.0, e.v.0] {
            count[x] += 1;
            first[x] = first[x].min(e.t);
        }
    }
    (0..n)
        .map(|i| {
            if count[i] == 0 {
                0.0
            } else {
                count[i] as f64 / (1.0 - first[i]).max(delta)
            }
        })
        .collect()
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn continuous_measures(sample: &TemporalGraphSample, delta: f64, grid: usize) -> ContinuousMeasures {
    assert!(delta > 0.0 && grid > 0, "delta and grid must be positive");
    let n = sample.n_nodes;
    let average_degree = average_degree(sample, delta);
    let mean_average_degree = average_degree.iter().sum::<f64>() / n as f64;

    let mut size_hist = vec![0.0; n];
    let mut groups_total = 0usize;
    let mut size_sum = 0.0;
    let mut coord_sum = 0.0;
    // Groups of two or more nodes, keyed by member list, mapped to the grid
    // index where their current run started.
    let mut open: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut runs: Vec<usize> = Vec::new();
    let mut lo = 0;
    let edges = &sample.edges;
    for k in 0..grid {
        let g = (k as f64 + 0.5) / grid as f64;
        while lo < edges.len() && edges[lo].t + delta < g {
            lo += 1;
        }
        let mut dsu = Dsu::new(n);
        let mut live = 0usize;
        for e in edges[lo..].iter().take_while(|e| e.t <= g) {
            if e.t + delta >= g {
                dsu.union(e.u.0, e.v.0);
                live += 1;
            }
        }
        // Each live contact adds one to the count of both endpoints.
        coord_sum += 2.0 * live as f64 / n as f64;
        let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
        for i in 0..n {
            members.entry(dsu.find(i)).or_default().push(i);
        }
        groups_total += members.len();
        size_sum += n as f64 / members.len() as f64;
        let mut now: HashMap<Vec<usize>, usize> = HashMap::new();
        for m in members.into_values() {
            size_hist[m.len() - 1] += 1.0;
            if m.len() >= 2 {
                let start = open.get(&m).copied().unwrap_or(k);
                now.insert(m, start);
            }
        }
        for (m, start) in open.drain() {
            if !now.contains_key(&m) {
                runs.push(k - start);
            }
        }
        open = now;
    }
    runs.extend(open.values().map(|&start| grid - start));

    size_hist.iter_mut().for_each(|h| *h /= groups_total as f64);
    let mean_group_duration = if runs.is_empty() {
        0.0
    } else {
        runs.iter().sum::<usize>() as f64 / runs.len() as f64 / grid as f64
    };
    ContinuousMeasures {
        average_degree,
        mean_average_degree,
        group_size: size_hist,
        average_group_size: size_sum / grid as f64,
        mean_group_number: groups_total as f64 / grid as f64,
        mean_coordination_number: coord_sum / grid as f64,
        mean_group_duration,
    }
}
