use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RBF kernel bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `sigma` is the median pairwise distance of the pooled sets.
    #[default]
    RbfMedianHeuristic,
    RbfFixed(f64),
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    /// `median` or `rbf:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "median" || s == "rbf_median_heuristic" {
            return Ok(Kernel::RbfMedianHeuristic);
        }
        let sigma = s
            .strip_prefix("rbf:")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("unknown kernel `{s}`")))?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("kernel bandwidth {sigma} must be positive")));
        }
        Ok(Kernel::RbfFixed(sigma))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn cmp_sets(a: &[Vec<f64>], b: &[Vec<f64>]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Median of the non-zero pairwise distances of the pooled set, or 1 when
/// every point coincides.
pub fn median_bandwidth(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&Vec<f64>> = x.iter().chain(y).collect();
    let mut d: Vec<f64> = Vec::with_capacity(pooled.len() * pooled.len() / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            let s = sq_dist(pooled[i], pooled[j]);
            if s > 0.0 {
                d.push(s.sqrt());
            }
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        0.5 * (d[m - 1] + d[m])
    }
}

fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], gamma: f64) -> f64 {
    let mut s = 0.0;
    for p in a {
        for q in b {
            s += (-gamma * sq_dist(p, q)).exp();
        }
    }
    s / (a.len() * b.len()) as f64
}

/// Biased estimate of the squared maximum mean discrepancy between two sets
/// of equal-dimension vectors under an RBF kernel.
///
/// The arguments are put into a canonical order first, so the result is
/// bit-identical under swapping them.
pub fn mmd(x: &[Vec<f64>], y: &[Vec<f64>], kernel: Kernel) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("mmd needs two non-empty sets".into()));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().chain(y).find(|v| v.len() != dim) {
        return Err(Error::Dimension(format!("vector of length {} among length {dim}", bad.len())));
    }
    let (x, y) = if cmp_sets(x, y) == Ordering::Greater { (y, x) } else { (x, y) };
    let sigma = match kernel {
        Kernel::RbfMedianHeuristic => median_bandwidth(x, y),
        Kernel::RbfFixed(s) => s,
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let v = mean_kernel(x, x, gamma) + mean_kernel(y, y, gamma) - 2.0 * mean_kernel(x, y, gamma);
    Ok(v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn draws(mean: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let d = Normal::new(mean, 1.0).unwrap();
        (0..n).map(|_| vec![d.sample(rng)]).collect()
    }

    #[test]
    fn identical_sets_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = draws(0.0, 50, &mut rng);
        let y = draws(0.5, 40, &mut rng);
        assert_eq!(mmd(&x, &x, Kernel::default()).unwrap(), 0.0);
        assert_eq!(mmd(&x, &y, Kernel::default()).unwrap(), mmd(&y, &x, Kernel::default()).unwrap());
        assert_eq!(
            mmd(&x, &y, Kernel::RbfFixed(0.7)).unwrap(),
            mmd(&y, &x, Kernel::RbfFixed(0.7)).unwrap()
        );
    }

    #[test]
    fn closed_form_two_points() {
        // k(0, 1) = exp(-1 / 2) with sigma = 1.
        let v = mmd(&[vec![0.0]], &[vec![1.0]], Kernel::RbfFixed(1.0)).unwrap();
        assert!((v - (2.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn shifted_gaussians_are_further_apart() {
        let mut wins = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = draws(0.0, 200, &mut rng);
            let b = draws(0.0, 200, &mut rng);
            let c = draws(2.0, 200, &mut rng);
            if mmd(&a, &c, Kernel::default()).unwrap() > mmd(&a, &b, Kernel::default()).unwrap() {
                wins += 1;
            }
        }
        assert!(wins >= 95);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(mmd(&[], &[vec![1.0]], Kernel::default()).is_err());
        assert!(mmd(&[vec![1.0, 2.0]], &[vec![1.0]], Kernel::default()).is_err());
        assert!("rbf:0".parse::<Kernel>().is_err());
        assert_eq!("rbf:2.5".parse::<Kernel>().unwrap(), Kernel::RbfFixed(2.5));
    }

    #[test]
    fn median_of_pairwise_distances() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![vec![3.0]];
        // Distances 1, 3, 2.
        assert_eq!(median_bandwidth(&x, &y), 2.0);
        assert_eq!(median_bandwidth(&[vec![1.0]], &[vec![1.0]]), 1.0);
    }
}
