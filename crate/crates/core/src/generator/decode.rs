use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use super::{Constraint, SoftPath};
use crate::nn::softmax;

/// Gap forced between consecutive equal budgets.
pub const SLACK: f64 = 1e-6;

/// `n` i.i.d. standard Gumbel draws.
pub fn gumbel<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let g = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
    (0..n).map(|_| g.sample(rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalSample {
    pub hard: usize,
    pub soft: Vec<f64>,
    /// `q + g`.
    pub perturbed: Vec<f64>,
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Gumbel-max decoding of logits `q` with noise `g` (zeros disable noise).
/// The hard sample is `argmax(q + g)`; the soft sample relaxes it at
/// temperature `tau`.
pub fn decode_categorical(q: &[f64], g: &[f64], tau: f64, path: SoftPath) -> CategoricalSample {
    debug_assert!(tau > 0.0);
    let perturbed: Vec<f64> = q.iter().zip(g).map(|(a, b)| a + b).collect();
    let scaled: Vec<f64> = perturbed.iter().map(|p| p / tau).collect();
    let soft = match path {
        SoftPath::Softmax => softmax(&scaled),
        SoftPath::Tanh => scaled.iter().map(|s| s.tanh()).collect(),
    };
    CategoricalSample {
        hard: argmax(&perturbed),
        soft,
        perturbed,
    }
}

/// Gradient w.r.t. the logits given the gradient w.r.t. the soft sample.
pub fn soft_backward(soft: &[f64], d_soft: &[f64], tau: f64, path: SoftPath) -> Vec<f64> {
    match path {
        SoftPath::Softmax => {
            let dot: f64 = soft.iter().zip(d_soft).map(|(s, d)| s * d).sum();
            soft.iter().zip(d_soft).map(|(s, d)| s * (d - dot) / tau).collect()
        }
        SoftPath::Tanh => soft.iter().zip(d_soft).map(|(s, d)| d * (1.0 - s * s) / tau).collect(),
    }
}

/// Batch statistics for minimax bounding: `t = (raw + shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MinimaxStats {
    pub shift: f64,
    pub scale: f64,
}

impl MinimaxStats {
    pub fn from_min_max(min: f64, max: f64, eps: f64, shift_only: bool) -> Self {
        let shift = if min <= eps {
            if shift_only {
                -min
            } else {
                eps - min
            }
        } else {
            0.0
        };
        let top = max + shift;
        Self {
            shift,
            scale: if top > 1.0 { top } else { 1.0 },
        }
    }

    pub fn from_batch(raw: &[f64], eps: f64, shift_only: bool) -> Self {
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::from_min_max(min, max, eps, shift_only)
    }

    pub fn identity() -> Self {
        Self { shift: 0.0, scale: 1.0 }
    }
}

/// Apply minimax bounding to a whole batch.
pub fn minimax_bound(raw: &[f64], eps: f64) -> Vec<f64> {
    let s = MinimaxStats::from_batch(raw, eps, false);
    raw.iter().map(|r| (r + s.shift) / s.scale).collect()
}

/// Local derivatives of a constrained budget.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintGrad {
    pub d_raw: f64,
    pub d_prev: f64,
}

/// Bound a raw budget.
///
/// `clip` and `nested_relu` both produce `max(0, min(raw, prev))`; the
/// latter's `relu(raw) - relu(raw - prev)` is evaluated branch-wise so the
/// result never overshoots `prev` through rounding. With `slack` set, a
/// result equal to a positive `prev` is pushed `SLACK` below it. `minimax`
/// ignores `prev` and applies `stats`, clamping into `[0, 1]`.
pub fn constrain(
    raw: f64,
    prev: f64,
    mode: Constraint,
    slack: bool,
    stats: &MinimaxStats,
) -> (f64, ConstraintGrad) {
    match mode {
        Constraint::Clip | Constraint::NestedRelu => {
            let (mut t, mut g) = if raw <= 0.0 {
                (0.0, ConstraintGrad::default())
            } else if raw >= prev {
                (prev, ConstraintGrad { d_raw: 0.0, d_prev: 1.0 })
            } else {
                (raw, ConstraintGrad { d_raw: 1.0, d_prev: 0.0 })
            };
            if slack && t == prev && prev >= SLACK {
                t = prev - SLACK;
                g = ConstraintGrad { d_raw: 0.0, d_prev: 1.0 };
            }
            (t, g)
        }
        Constraint::Minimax => {
            let t = (raw + stats.shift) / stats.scale;
            if t < 0.0 {
                (0.0, ConstraintGrad::default())
            } else if t > 1.0 {
                (1.0, ConstraintGrad::default())
            } else {
                (
                    t,
                    ConstraintGrad {
                        d_raw: 1.0 / stats.scale,
                        d_prev: 0.0,
                    },
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nr(raw: f64, prev: f64) -> f64 {
        constrain(raw, prev, Constraint::NestedRelu, false, &MinimaxStats::identity()).0
    }

    #[test]
    fn nested_relu_examples() {
        assert_eq!(nr(0.5, 0.7), 0.5);
        assert_eq!(nr(0.9, 0.7), 0.7);
        assert_eq!(nr(-0.3, 0.7), 0.0);
        // Relu form evaluated naively can overshoot prev.
        let (raw, prev) = (0.30000000000000004, 0.1);
        assert!(nr(raw, prev) <= prev);
    }

    #[test]
    fn slack_only_below_positive_prev() {
        let id = MinimaxStats::identity();
        let (t, _) = constrain(0.9, 0.7, Constraint::Clip, true, &id);
        assert_eq!(t, 0.7 - SLACK);
        assert_eq!(constrain(0.5, 0.7, Constraint::Clip, true, &id).0, 0.5);
        assert_eq!(constrain(0.1, 0.0, Constraint::Clip, true, &id).0, 0.0);
    }

    #[test]
    fn minimax_example() {
        let out = minimax_bound(&[-0.1, 0.5, 1.2], 1e-3);
        let expect = [0.001 / 1.301, 0.601 / 1.301, 1.0];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{out:?}");
        }
        assert!((out[0] - 0.00077).abs() < 1e-5 && (out[1] - 0.4620).abs() < 1e-4);
        let st = MinimaxStats::from_batch(&[-0.1, 0.5, 1.2], 1e-3, true);
        assert_eq!((-0.1 + st.shift) / st.scale, 0.0);
        // Already inside (eps, 1]: untouched.
        assert_eq!(minimax_bound(&[0.2, 0.9], 1e-3), vec![0.2, 0.9]);
    }

    #[test]
    fn argmax_is_preserved() {
        for path in [SoftPath::Softmax, SoftPath::Tanh] {
            let s = decode_categorical(&[2.0, -1.0], &[0.0, 0.0], 0.3, path);
            assert_eq!(s.hard, 0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let q: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = gumbel(5, &mut rng);
            let tau = rng.random_range(0.05..5.0);
            let s = decode_categorical(&q, &g, tau, SoftPath::Softmax);
            assert_eq!(s.hard, argmax(&s.soft));
            assert_eq!(s.hard, argmax(&s.perturbed));
        }
    }

    #[test]
    fn soft_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for path in [SoftPath::Softmax, SoftPath::Tanh] {
            for _ in 0..20 {
                let q: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let tau = rng.random_range(0.5..3.0);
                let rep = grad_check(&q, |x| {
                    let s = decode_categorical(x, &[0.0; 4], tau, path);
                    let v = s.soft.iter().zip(&r).map(|(a, b)| a * b).sum();
                    (v, soft_backward(&s.soft, &r, tau, path))
                });
                assert!(rep.max_rel_err < 1e-6, "{rep:?}");
            }
        }
    }

    #[test]
    fn gumbel_max_sampling_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = [2f64.ln(), 0.0, 0.0];
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            let g = gumbel(3, &mut rng);
            counts[decode_categorical(&q, &g, 1.0, SoftPath::Softmax).hard] += 1;
        }
        for (c, p) in counts.iter().zip([0.5, 0.25, 0.25]) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01, "{counts:?}");
        }
    }
}
