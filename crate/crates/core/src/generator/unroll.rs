use rand::Rng;

use super::decode::{constrain, decode_categorical, gumbel, soft_backward, CategoricalSample, ConstraintGrad, MinimaxStats};
use super::model::{EncCache, Generator, TimeCache};
use super::{Constraint, GenConfig};
use crate::graph::{BudgetEdge, TruncatedWalk, WalkProfile};
use crate::nn::lstm::LstmCache;
use crate::nn::one_hot;

/// Position of a token in the decoded sequence. Edge indices start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    X,
    T0,
    U(usize),
    V(usize),
    T(usize),
    Y,
}

impl TokenKind {
    /// `x, t0, (u_i, v_i, t_i) for i in 1..=l, y`.
    pub fn sequence(l: usize) -> Vec<TokenKind> {
        let mut out = vec![TokenKind::X, TokenKind::T0];
        for i in 1..=l {
            out.extend([TokenKind::U(i), TokenKind::V(i), TokenKind::T(i)]);
        }
        out.push(TokenKind::Y);
        out
    }

    pub fn is_time(self) -> bool {
        matches!(self, TokenKind::T0 | TokenKind::T(_))
    }

    /// Index of the budget slot `t0..tL`.
    pub fn time_slot(self) -> Option<usize> {
        match self {
            TokenKind::T0 => Some(0),
            TokenKind::T(i) => Some(i),
            _ => None,
        }
    }

    /// Width of the token's value: 2 for flags, `n_nodes` for ids, 1 for
    /// budgets.
    pub fn width(self, n_nodes: usize) -> usize {
        match self {
            TokenKind::X | TokenKind::Y => 2,
            TokenKind::U(_) | TokenKind::V(_) => n_nodes,
            TokenKind::T0 | TokenKind::T(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TokenValue {
    Cat(usize),
    Time(f64),
}

impl TokenValue {
    pub fn cat(self) -> usize {
        match self {
            TokenValue::Cat(i) => i,
            TokenValue::Time(_) => panic!("expected a categorical token"),
        }
    }

    pub fn time(self) -> f64 {
        match self {
            TokenValue::Time(t) => t,
            TokenValue::Cat(_) => panic!("expected a budget token"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub value: TokenValue,
    /// Relaxed sample of a decoded categorical token.
    pub soft: Option<Vec<f64>>,
    /// Teacher-forced or structurally fixed; carries no gradient.
    pub forced: bool,
}

/// Decoded truncated walk with its relaxed categorical samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftWalk {
    pub tokens: Vec<Token>,
}

impl SoftWalk {
    pub fn n_edges(&self) -> usize {
        (self.tokens.len() - 3) / 3
    }

    pub fn x(&self) -> u8 {
        self.tokens[0].value.cat() as u8
    }

    pub fn t0_bar(&self) -> f64 {
        self.tokens[1].value.time()
    }

    pub fn y(&self) -> u8 {
        self.tokens.last().expect("non-empty walk").value.cat() as u8
    }

    pub fn edges(&self) -> Vec<BudgetEdge> {
        (0..self.n_edges())
            .map(|i| {
                let b = 2 + 3 * i;
                BudgetEdge::new(
                    self.tokens[b].value.cat(),
                    self.tokens[b + 1].value.cat(),
                    self.tokens[b + 2].value.time(),
                )
            })
            .collect()
    }

    pub fn to_truncated(&self) -> TruncatedWalk {
        TruncatedWalk {
            profile: WalkProfile {
                x: self.x(),
                y: self.y(),
                t0_bar: self.t0_bar(),
            },
            edges: self.edges(),
            jumps: Vec::new(),
        }
    }
}

/// Upstream gradient for one token: w.r.t. the emitted indicator vector or
/// the emitted budget.
#[derive(Debug, Clone, PartialEq)]
pub enum GradIn {
    None,
    Cat(Vec<f64>),
    Time(f64),
}

#[derive(Debug, Clone, Copy)]
enum Head {
    X,
    Y,
    V,
}

#[derive(Debug, Clone)]
enum Decoded {
    Forced,
    Cat {
        head: Head,
        soft: Vec<f64>,
        /// Gap between the two largest perturbed logits.
        gap: f64,
    },
    Time {
        cache: TimeCache,
        grad: ConstraintGrad,
        prev_token: Option<usize>,
        raw: f64,
        prev: f64,
    },
}

#[derive(Debug, Clone)]
struct StepTape {
    lstm: LstmCache,
    o: Vec<f64>,
    dec: Decoded,
    /// Encoding of this step's token, fed to the next step.
    enc: Option<EncCache>,
}

#[derive(Debug, Clone)]
struct WalkTape {
    z: Vec<f64>,
    h0: Vec<f64>,
    steps: Vec<StepTape>,
}

/// Everything the backward pass needs from a batched unroll.
#[derive(Debug, Clone)]
pub struct BatchTape {
    walks: Vec<WalkTape>,
    tau: f64,
    /// Minimax statistics computed from this batch, per budget slot.
    pub batch_stats: Vec<Option<MinimaxStats>>,
}

impl BatchTape {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    /// Smallest distance of any free budget from a kink of its bounding
    /// activation, and of any categorical draw from an argmax tie.
    pub fn min_kink_margin(&self) -> f64 {
        let mut m = f64::INFINITY;
        for w in &self.walks {
            for s in &w.steps {
                match &s.dec {
                    Decoded::Time { raw, prev, .. } => m = m.min(raw.abs()).min((raw - prev).abs()),
                    Decoded::Cat { gap, .. } => m = m.min(*gap),
                    Decoded::Forced => {}
                }
                if let Decoded::Time {
                    cache: TimeCache::Deep { cache, .. },
                    ..
                } = &s.dec
                {
                    m = m.min(cache.min_abs_hidden_preactivation());
                }
            }
        }
        m
    }
}

fn top_gap(s: &CategoricalSample) -> f64 {
    let best = s.perturbed[s.hard];
    s.perturbed
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != s.hard)
        .map(|(_, &v)| best - v)
        .fold(f64::INFINITY, f64::min)
}

/// Value fixed by the generator's structure rather than decoded.
fn implied(cfg: &GenConfig, kind: TokenKind, done: &[Token]) -> Option<TokenValue> {
    match kind {
        TokenKind::T0 if done[0].value == TokenValue::Cat(1) => Some(TokenValue::Time(1.0)),
        TokenKind::U(i) if i >= 2 && cfg.force_connectivity => Some(done[done.len() - 2].value),
        _ => None,
    }
}

impl Generator {
    fn head(&self, h: Head) -> &crate::nn::Dense {
        match h {
            Head::X => &self.dec_x,
            Head::Y => &self.dec_y,
            Head::V => &self.dec_v,
        }
    }

    pub(crate) fn encode_value(&self, kind: TokenKind, value: TokenValue) -> (Vec<f64>, EncCache) {
        match (kind, value) {
            (TokenKind::X | TokenKind::Y, TokenValue::Cat(i)) => self.encode_flag_id(i),
            (TokenKind::U(_) | TokenKind::V(_), TokenValue::Cat(i)) => self.encode_node_id(i),
            (_, TokenValue::Time(t)) => self.encode_time(t),
            (k, v) => panic!("token {k:?} cannot hold {v:?}"),
        }
    }

    /// Decode one categorical token from the LSTM output.
    fn sample_cat<R: Rng + ?Sized>(
        &self,
        kind: TokenKind,
        o: &[f64],
        tau: f64,
        rng: &mut R,
    ) -> (CategoricalSample, Head) {
        let head = match kind {
            TokenKind::X => Head::X,
            TokenKind::Y => Head::Y,
            _ => Head::V,
        };
        let q = self.head(head).forward(o);
        let g = if self.config().noise {
            gumbel(q.len(), rng)
        } else {
            vec![0.0; q.len()]
        };
        (decode_categorical(&q, &g, tau, self.config().soft_path), head)
    }

    /// Unroll a batch of walks in lockstep.
    ///
    /// `forced[w][k]`, when present, fixes token `k` of walk `w` without
    /// drawing randomness. Minimax bounding uses statistics of the batch when
    /// `batch_stats` is set and the stored statistics otherwise. Random draws
    /// happen step by step, walk by walk, so a batch of one consumes the
    /// stream exactly like a single unroll.
    pub fn unroll_batch<R: Rng + ?Sized>(
        &self,
        zs: &[Vec<f64>],
        forced: &[Vec<Option<TokenValue>>],
        tau: f64,
        batch_stats: bool,
        rng: &mut R,
    ) -> (Vec<SoftWalk>, BatchTape) {
        self.unroll_pieces(zs, forced, self.config().max_len, tau, batch_stats, rng)
    }

    /// [`Self::unroll_batch`] emitting `n_edges <= max_len` edges before `y`.
    pub(crate) fn unroll_pieces<R: Rng + ?Sized>(
        &self,
        zs: &[Vec<f64>],
        forced: &[Vec<Option<TokenValue>>],
        n_edges: usize,
        tau: f64,
        batch_stats: bool,
        rng: &mut R,
    ) -> (Vec<SoftWalk>, BatchTape) {
        let cfg = self.config();
        debug_assert!((1..=cfg.max_len).contains(&n_edges));
        let kinds = TokenKind::sequence(n_edges);
        let b = zs.len();
        let mut states: Vec<_> = zs.iter().map(|z| self.initial_state(z)).collect();
        let mut walks: Vec<WalkTape> = zs
            .iter()
            .zip(&states)
            .map(|(z, s)| WalkTape {
                z: z.clone(),
                h0: s.h.clone(),
                steps: Vec::with_capacity(kinds.len()),
            })
            .collect();
        let mut tokens: Vec<Vec<Token>> = vec![Vec::with_capacity(kinds.len()); b];
        let mut inputs = vec![vec![0.0; cfg.input_dim]; b];
        let mut stats_out = vec![None; cfg.max_len + 1];
        let mut last_time: Vec<Option<usize>> = vec![None; b];

        for (k, &kind) in kinds.iter().enumerate() {
            let mut outs = Vec::with_capacity(b);
            for w in 0..b {
                let (st, cache) = self.lstm.step(&states[w], &inputs[w]);
                outs.push((st.h.clone(), cache));
                states[w] = st;
            }
            // Decode, drawing randomness walk by walk.
            let mut pending: Vec<(Option<TokenValue>, Option<(f64, TimeCache)>, Option<(CategoricalSample, Head)>)> =
                Vec::with_capacity(b);
            for w in 0..b {
                let fixed = forced
                    .get(w)
                    .and_then(|f| f.get(k).copied().flatten())
                    .or_else(|| implied(cfg, kind, &tokens[w]));
                let o = &outs[w].0;
                if fixed.is_some() {
                    pending.push((fixed, None, None));
                } else if kind.is_time() {
                    pending.push((None, Some(self.time.forward(o, cfg, cfg.noise, rng)), None));
                } else {
                    pending.push((None, None, Some(self.sample_cat(kind, o, tau, rng))));
                }
            }
            let stats = match (kind.time_slot(), cfg.constraint) {
                (Some(slot), Constraint::Minimax) => {
                    let raws: Vec<f64> = pending.iter().filter_map(|p| p.1.as_ref().map(|r| r.0)).collect();
                    if batch_stats && !raws.is_empty() {
                        let s = MinimaxStats::from_batch(&raws, cfg.minimax_eps, cfg.minimax_shift_only);
                        stats_out[slot] = Some(s);
                        s
                    } else {
                        self.minimax_stats[slot]
                    }
                }
                _ => MinimaxStats::identity(),
            };
            for (w, ((o, lstm), (fixed, time, cat))) in outs.into_iter().zip(pending).enumerate() {
                let (value, soft, dec) = if let Some(v) = fixed {
                    (v, None, Decoded::Forced)
                } else if let Some((raw, cache)) = time {
                    let prev_token = last_time[w];
                    let prev = prev_token.map_or(1.0, |i| tokens[w][i].value.time());
                    let slack = matches!(kind, TokenKind::T(i) if i >= 2);
                    let (t, grad) = constrain(raw, prev, cfg.constraint, slack, &stats);
                    (
                        TokenValue::Time(t),
                        None,
                        Decoded::Time {
                            cache,
                            grad,
                            prev_token,
                            raw,
                            prev,
                        },
                    )
                } else {
                    let (s, head) = cat.expect("categorical draw");
                    let gap = top_gap(&s);
                    (
                        TokenValue::Cat(s.hard),
                        Some(s.soft.clone()),
                        Decoded::Cat { head, soft: s.soft, gap },
                    )
                };
                let enc = (k + 1 < kinds.len()).then(|| {
                    let (a, c) = self.encode_value(kind, value);
                    inputs[w] = a;
                    c
                });
                if kind.is_time() {
                    last_time[w] = Some(k);
                }
                let forced_flag = matches!(dec, Decoded::Forced);
                tokens[w].push(Token {
                    kind,
                    value,
                    soft,
                    forced: forced_flag,
                });
                walks[w].steps.push(StepTape { lstm, o, dec, enc });
            }
        }
        let soft_walks = tokens.into_iter().map(|tokens| SoftWalk { tokens }).collect();
        (
            soft_walks,
            BatchTape {
                walks,
                tau,
                batch_stats: stats_out,
            },
        )
    }

    /// Unroll fresh walks: draws every `z` first, then decodes.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        n: usize,
        tau: f64,
        rng: &mut R,
    ) -> (Vec<SoftWalk>, BatchTape) {
        let zs: Vec<Vec<f64>> = (0..n).map(|_| self.sample_z(rng)).collect();
        self.unroll_batch(&zs, &[], tau, true, rng)
    }

    /// Accumulate parameter gradients for upstream gradients `grads[w][k]`.
    ///
    /// With `straight_through` the gradient reaching a hard categorical
    /// token (from downstream consumers and from the re-encoding fed to the
    /// next step) is passed to its relaxed sample. Without it, only the
    /// upstream gradient on the relaxed sample itself is used and the hard
    /// feedback path is treated as constant, which is the exact derivative of
    /// the computation and is what finite differences see.
    pub fn backward(&mut self, tape: &BatchTape, grads: &[Vec<GradIn>], straight_through: bool) {
        let n_nodes = self.n_nodes();
        let hidden = self.config().hidden;
        let path = self.config().soft_path;
        for (w, walk) in tape.walks.iter().enumerate() {
            let kinds = TokenKind::sequence((walk.steps.len() - 3) / 3);
            let mut d_val: Vec<Vec<f64>> = kinds.iter().map(|k| vec![0.0; k.width(n_nodes)]).collect();
            if let Some(g) = grads.get(w) {
                for (dv, gi) in d_val.iter_mut().zip(g) {
                    match gi {
                        GradIn::None => {}
                        GradIn::Cat(v) => dv.iter_mut().zip(v).for_each(|(a, b)| *a += b),
                        GradIn::Time(t) => dv[0] += t,
                    }
                }
            }
            let mut dh_next = vec![0.0; hidden];
            let mut dc_next = vec![0.0; hidden];
            for k in (0..walk.steps.len()).rev() {
                let step = &walk.steps[k];
                let d_o = match &step.dec {
                    Decoded::Forced => None,
                    Decoded::Cat { head, soft, .. } => {
                        let dq = soft_backward(soft, &d_val[k], tape.tau, path);
                        let dense = match head {
                            Head::X => &mut self.dec_x,
                            Head::Y => &mut self.dec_y,
                            Head::V => &mut self.dec_v,
                        };
                        Some(dense.backward(&step.o, &dq, true))
                    }
                    Decoded::Time {
                        cache, grad, prev_token, ..
                    } => {
                        let dt = d_val[k][0];
                        if let Some(p) = prev_token {
                            d_val[*p][0] += dt * grad.d_prev;
                        }
                        Some(self.time.backward(&step.o, cache, dt * grad.d_raw, true))
                    }
                };
                if let Some(d_o) = d_o {
                    dh_next.iter_mut().zip(d_o).for_each(|(a, b)| *a += b);
                }
                let (dx, dh_prev, dc_prev) = self.lstm.backward(&step.lstm, &dh_next, &dc_next, true);
                if k > 0 {
                    let prev = &walk.steps[k - 1];
                    let enc = prev.enc.as_ref().expect("every non-final step is encoded");
                    let d_prev_val = self.encode_backward(enc, &dx);
                    let keep = match prev.dec {
                        Decoded::Forced => false,
                        Decoded::Cat { .. } => straight_through,
                        Decoded::Time { .. } => true,
                    };
                    if keep {
                        d_val[k - 1].iter_mut().zip(d_prev_val).for_each(|(a, b)| *a += b);
                    }
                }
                dh_next = dh_prev;
                dc_next = dc_prev;
            }
            self.initial_backward(&walk.z, &walk.h0, &dc_next, &dh_next);
        }
    }
}

/// One-hot rows of a soft walk's hard values, in token order.
pub fn hard_indicators(walk: &SoftWalk, n_nodes: usize) -> Vec<Vec<f64>> {
    walk.tokens
        .iter()
        .map(|t| match t.value {
            TokenValue::Cat(i) => one_hot(i, t.kind.width(n_nodes)),
            TokenValue::Time(x) => vec![x],
        })
        .collect()
}
