//! Measures on binned snapshots.
//!
//! - Betweenness and closeness use the directed union of all snapshots.
//!   Betweenness is normalized by `(n - 1)(n - 2)`; closeness follows
//!   out-distances with the Wasserman-Faust correction for unreachable
//!   nodes.
//! - Broadcast and receive centralities are the row and column sums of
//!   `Q = prod_t (I - a A_t)^-1` with `a = 0.9 / n`, which is below the
//!   inverse spectral radius of any `n x n` 0/1 matrix.
//! - Burstiness `(s - m) / (s + m)` is computed from the gaps between the
//!   bins in which a node is active; nodes active in fewer than two bins
//!   score -1.
//! - Temporal correlation compares each node's undirected neighbourhood in
//!   consecutive bins. Nodes never active are undefined; their entry in the
//!   per-node vector is 0 and they are left out of the mean.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::graph::SnapshotSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMeasures {
    pub betweenness: Vec<f64>,
    pub closeness: Vec<f64>,
    pub broadcast: Vec<f64>,
    pub receive: Vec<f64>,
    pub burstiness: Vec<f64>,
    /// `None` when no node is ever active or there is a single bin.
    pub node_temporal_correlation: Option<Vec<f64>>,
    pub temporal_correlation: Option<f64>,
}

fn aggregate(s: &SnapshotSequence) -> Vec<Vec<usize>> {
    let n = s.n_nodes;
    let mut adj = vec![Vec::new(); n];
    for u in 0..n {
        for v in 0..n {
            if u != v && (0..s.n_bins).any(|k| s.get(k, u, v)) {
                adj[u].push(v);
            }
        }
    }
    adj
}

fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        let d = dist[u].expect("queued nodes have a distance");
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

/// Brandes' algorithm on an unweighted directed graph.
pub fn betweenness(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut cb = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::new();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0; n];
        let mut dist: Vec<i64> = vec![-1; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    if n > 2 {
        let norm = ((n - 1) * (n - 2)) as f64;
        cb.iter_mut().for_each(|c| *c /= norm);
    }
    cb
}

pub fn closeness(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    (0..n)
        .map(|u| {
            let dist = bfs(adj, u);
            let (r, total) = dist
                .iter()
                .enumerate()
                .filter(|&(v, d)| v != u && d.is_some())
                .fold((0usize, 0usize), |(r, t), (_, d)| (r + 1, t + d.unwrap()));
            if r == 0 {
                0.0
            } else {
                (r as f64 / (n - 1) as f64) * (r as f64 / total as f64)
            }
        })
        .collect()
}

/// Row and column sums of the communicability product.
pub fn broadcast_receive(s: &SnapshotSequence) -> (Vec<f64>, Vec<f64>) {
    let n = s.n_nodes;
    let a = 0.9 / n as f64;
    let factors: Vec<DMatrix<f64>> = s
        .mats
        .iter()
        .filter(|m| m.iter().any(|&x| x != 0))
        .map(|m| DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - a * f64::from(m[i * n + j])))
        .collect();
    let mut b = DVector::from_element(n, 1.0);
    for f in factors.iter().rev() {
        b = f.clone().lu().solve(&b).expect("I - aA is non-singular");
    }
    let mut r = DVector::from_element(n, 1.0);
    for f in &factors {
        r = f.transpose().lu().solve(&r).expect("I - aA is non-singular");
    }
    (b.iter().copied().collect(), r.iter().copied().collect())
}

fn active(s: &SnapshotSequence, k: usize, i: usize) -> bool {
    (0..s.n_nodes).any(|j| s.get(k, i, j) || s.get(k, j, i))
}

pub fn burstiness(s: &SnapshotSequence) -> Vec<f64> {
    (0..s.n_nodes)
        .map(|i| {
            let bins: Vec<usize> = (0..s.n_bins).filter(|&k| active(s, k, i)).collect();
            if bins.len() < 2 {
                return -1.0;
            }
            let gaps: Vec<f64> = bins.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
            let m = gaps.iter().sum::<f64>() / gaps.len() as f64;
            let sd = (gaps.iter().map(|g| (g - m) * (g - m)).sum::<f64>() / gaps.len() as f64).sqrt();
            (sd - m) / (sd + m)
        })
        .collect()
}

/// Per-node temporal correlation, `None` for nodes never active.
pub fn node_correlation(s: &SnapshotSequence) -> Vec<Option<f64>> {
    let n = s.n_nodes;
    let nb = |k: usize, i: usize, j: usize| s.get(k, i, j) || s.get(k, j, i);
    (0..n)
        .map(|i| {
            if s.n_bins < 2 || !(0..s.n_bins).any(|k| active(s, k, i)) {
                return None;
            }
            let mut c = 0.0;
            for k in 0..s.n_bins - 1 {
                let (mut both, mut d0, mut d1) = (0usize, 0usize, 0usize);
                for j in 0..n {
                    let (a, b) = (nb(k, i, j), nb(k + 1, i, j));
                    d0 += usize::from(a);
                    d1 += usize::from(b);
                    both += usize::from(a && b);
                }
                if d0 > 0 && d1 > 0 {
                    c += both as f64 / ((d0 * d1) as f64).sqrt();
                }
            }
            Some(c / (s.n_bins - 1) as f64)
        })
        .collect()
}

pub fn snapshot_measures(s: &SnapshotSequence) -> SnapshotMeasures {
    let adj = aggregate(s);
    let (broadcast, receive) = broadcast_receive(s);
    let nc = node_correlation(s);
    let defined: Vec<f64> = nc.iter().flatten().copied().collect();
    let (node_temporal_correlation, temporal_correlation) = if defined.is_empty() {
        (None, None)
    } else {
        (
            Some(nc.iter().map(|c| c.unwrap_or(0.0)).collect()),
            Some(defined.iter().sum::<f64>() / defined.len() as f64),
        )
    };
    SnapshotMeasures {
        betweenness: betweenness(&adj),
        closeness: closeness(&adj),
        broadcast,
        receive,
        burstiness: burstiness(s),
        node_temporal_correlation,
        temporal_correlation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{to_snapshots, TemporalEdge, TemporalGraphSample};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(n: usize, n_bins: usize, entries: &[(usize, usize, usize)]) -> SnapshotSequence {
        let mut mats = vec![vec![0u8; n * n]; n_bins];
        for &(k, u, v) in entries {
            mats[k][u * n + v] = 1;
        }
        SnapshotSequence {
            n_nodes: n,
            n_bins,
            t_end_raw: 1.0,
            mats,
        }
    }

    #[test]
    fn empty_sequence() {
        let m = snapshot_measures(&seq(4, 3, &[]));
        assert_eq!(m.betweenness, vec![0.0; 4]);
        assert_eq!(m.closeness, vec![0.0; 4]);
        assert_eq!(m.broadcast, vec![1.0; 4]);
        assert_eq!(m.receive, vec![1.0; 4]);
        assert_eq!(m.burstiness, vec![-1.0; 4]);
        assert_eq!(m.temporal_correlation, None);
        assert_eq!(m.node_temporal_correlation, None);
    }

    #[test]
    fn path_centralities() {
        // 0 -> 1 -> 2: only node 1 lies between a pair.
        let adj = vec![vec![1], vec![2], vec![]];
        assert_eq!(betweenness(&adj), vec![0.0, 0.5, 0.0]);
        let c = closeness(&adj);
        // Node 0 reaches 2 nodes at total distance 3.
        assert!((c[0] - (2.0 / 2.0) * (2.0 / 3.0)).abs() < 1e-15);
        assert!((c[1] - 0.5).abs() < 1e-15);
        assert_eq!(c[2], 0.0);
    }

    #[test]
    fn communicability_of_one_edge() {
        // (I - aA)^-1 = I + aA for a single edge, so node 0 broadcasts 1 + a.
        let s = seq(2, 2, &[(0, 0, 1)]);
        let (b, r) = broadcast_receive(&s);
        let a = 0.9 / 2.0;
        assert!((b[0] - (1.0 + a)).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
        assert!((r[1] - (1.0 + a)).abs() < 1e-12 && (r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn communicability_respects_time_order() {
        // 0 -> 1 then 1 -> 2 lets 0 reach 2; the reverse order does not.
        let a = 0.9 / 3.0;
        let fwd = broadcast_receive(&seq(3, 2, &[(0, 0, 1), (1, 1, 2)])).0;
        let rev = broadcast_receive(&seq(3, 2, &[(1, 0, 1), (0, 1, 2)])).0;
        assert!((fwd[0] - (1.0 + a + a * a)).abs() < 1e-12);
        assert!((rev[0] - (1.0 + a)).abs() < 1e-12);
    }

    #[test]
    fn persistent_neighbourhood_correlates_fully() {
        let entries: Vec<_> = (0..5).flat_map(|k| [(k, 0, 1), (k, 2, 3)]).collect();
        let m = snapshot_measures(&seq(4, 5, &entries));
        assert_eq!(m.node_temporal_correlation, Some(vec![1.0; 4]));
        assert_eq!(m.temporal_correlation, Some(1.0));
    }

    #[test]
    fn correlation_is_a_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(2..8);
            let bins = rng.random_range(2..6);
            let entries: Vec<_> = (0..rng.random_range(0..30))
                .map(|_| (rng.random_range(0..bins), rng.random_range(0..n), rng.random_range(0..n)))
                .collect();
            if let Some(c) = snapshot_measures(&seq(n, bins, &entries)).temporal_correlation {
                assert!((0.0..=1.0 + 1e-12).contains(&c));
            }
        }
    }

    #[test]
    fn periodic_and_poisson_trains() {
        let bins = 2000;
        let periodic: Vec<_> = (0..bins).step_by(10).map(|k| (k, 0, 1)).collect();
        assert_eq!(burstiness(&seq(2, bins, &periodic))[0], -1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut edges = Vec::new();
        let mut t = 0.0;
        loop {
            t += -rng.random::<f64>().ln() / 200.0;
            if t >= 1.0 {
                break;
            }
            edges.push(TemporalEdge::new(0, 1, t));
        }
        let s = TemporalGraphSample::new(2, edges, 1.0).unwrap();
        let b = burstiness(&to_snapshots(&s, 20_000).unwrap())[0];
        assert!(b.abs() < 0.1, "{b}");
    }
}
