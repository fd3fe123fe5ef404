use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{SoftWalk, TokenKind, TokenValue};
use crate::graph::TruncatedWalk;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::lstm::LstmCache;
use crate::nn::{one_hot, Dense, Embedding, Lstm, LstmState, Module};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticConfig {
    pub hidden: usize,
    pub input_dim: usize,
    pub flag_embed: usize,
    pub node_embed: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            hidden: 40,
            input_dim: 32,
            flag_embed: 4,
            node_embed: 16,
        }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hidden", self.hidden),
            ("input_dim", self.input_dim),
            ("flag_embed", self.flag_embed),
            ("node_embed", self.node_embed),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("critic {name} must be positive")));
            }
        }
        Ok(())
    }
}

/// A walk as critic input: one row per token of the `max_len` layout,
/// indicator vectors for flags and ids, a single value for budgets.
pub type WalkInput = Vec<Vec<f64>>;

/// Encode a sampled walk. Edge slots past the walk's end are all zeros.
pub fn encode_real(walk: &TruncatedWalk, n_nodes: usize, max_len: usize) -> Result<WalkInput> {
    if walk.edges.len() > max_len {
        return Err(Error::InvalidWalk(format!(
            "walk of {} edges exceeds the critic's {max_len}",
            walk.edges.len()
        )));
    }
    let mut rows = vec![one_hot(walk.profile.x as usize, 2), vec![walk.profile.t0_bar]];
    for i in 0..max_len {
        match walk.edges.get(i) {
            Some(e) => rows.extend([one_hot(e.u.0, n_nodes), one_hot(e.v.0, n_nodes), vec![e.t_bar]]),
            None => rows.extend([vec![0.0; n_nodes], vec![0.0; n_nodes], vec![0.0]]),
        }
    }
    rows.push(one_hot(walk.profile.y as usize, 2));
    Ok(rows)
}

/// Encode a generated walk, with hard indicators or relaxed samples.
pub fn encode_fake(walk: &SoftWalk, n_nodes: usize, hard: bool) -> WalkInput {
    walk.tokens
        .iter()
        .map(|t| match (t.value, &t.soft) {
            (TokenValue::Time(x), _) => vec![x],
            (TokenValue::Cat(_), Some(s)) if !hard => s.clone(),
            (TokenValue::Cat(i), _) => one_hot(i, t.kind.width(n_nodes)),
        })
        .collect()
}

/// A differentiable scalar score over walk inputs.
pub trait Discriminator: Module {
    fn score(&self, x: &[Vec<f64>]) -> f64;

    /// Returns `d * dD/dx` at `x`, adding `d * dD/dtheta` to the parameter
    /// gradients when `acc` is set.
    fn backprop(&mut self, x: &[Vec<f64>], d: f64, acc: bool) -> WalkInput;
}

/// Penalty `(|dD/dx| - 1)^2` at `x`. Adds `coef` times its parameter
/// gradient, using a central difference of parameter gradients along the
/// input-gradient direction with step `h`.
pub fn gradient_penalty<D: Discriminator>(d: &mut D, x: &[Vec<f64>], coef: f64, h: f64) -> f64 {
    let g = d.backprop(x, 1.0, false);
    let norm = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let pen = (norm - 1.0) * (norm - 1.0);
    if coef != 0.0 && norm > 0.0 {
        let shift = |sign: f64| -> WalkInput {
            x.iter()
                .zip(&g)
                .map(|(r, gr)| r.iter().zip(gr).map(|(a, b)| a + sign * h * b / norm).collect())
                .collect()
        };
        let c = coef * 2.0 * (norm - 1.0) / (2.0 * h);
        d.backprop(&shift(1.0), c, true);
        d.backprop(&shift(-1.0), -c, true);
    }
    pen
}

#[derive(Debug, Clone)]
enum Enc {
    Flag(Vec<f64>),
    Node(Vec<f64>),
    Time,
}

/// LSTM critic with its own token encoders and a linear head on the final
/// hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub flag_emb: Embedding,
    pub flag_enc: Dense,
    pub node_emb: Embedding,
    pub node_enc: Dense,
    pub time_enc: Dense,
    pub lstm: Lstm,
    pub head: Dense,
    cfg: CriticConfig,
    n_nodes: usize,
    max_len: usize,
}

crate::impl_module!(Critic {
    flag_emb, flag_enc, node_emb, node_enc, time_enc, lstm, head
});

#[derive(Serialize, Deserialize)]
struct CriticMeta {
    config: CriticConfig,
    n_nodes: usize,
    max_len: usize,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(cfg: CriticConfig, n_nodes: usize, max_len: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if n_nodes == 0 || max_len == 0 {
            return Err(Error::Config("critic needs a node universe and a walk length".into()));
        }
        let i = cfg.input_dim;
        Ok(Self {
            flag_emb: Embedding::new(2, cfg.flag_embed, rng),
            flag_enc: Dense::new(cfg.flag_embed, i, rng),
            node_emb: Embedding::new(n_nodes, cfg.node_embed, rng),
            node_enc: Dense::new(cfg.node_embed, i, rng),
            time_enc: Dense::new(1, i, rng),
            lstm: Lstm::new(i, cfg.hidden, rng),
            head: Dense::new(cfg.hidden, 1, rng),
            cfg,
            n_nodes,
            max_len,
        })
    }

    pub fn config(&self) -> &CriticConfig {
        &self.cfg
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    fn check(&self, x: &[Vec<f64>]) {
        let kinds = TokenKind::sequence(self.max_len);
        assert_eq!(x.len(), kinds.len(), "walk input has {} rows, expected {}", x.len(), kinds.len());
        for (row, k) in x.iter().zip(&kinds) {
            assert_eq!(row.len(), k.width(self.n_nodes), "row width for {k:?}");
        }
    }

    fn encode(&self, kind: TokenKind, row: &[f64]) -> (Vec<f64>, Enc) {
        match kind {
            TokenKind::X | TokenKind::Y => {
                let e = self.flag_emb.forward(row);
                (self.flag_enc.forward(&e), Enc::Flag(e))
            }
            TokenKind::U(_) | TokenKind::V(_) => {
                let e = self.node_emb.forward(row);
                (self.node_enc.forward(&e), Enc::Node(e))
            }
            TokenKind::T0 | TokenKind::T(_) => (self.time_enc.forward(row), Enc::Time),
        }
    }

    fn forward(&self, x: &[Vec<f64>]) -> (f64, Vec<(Enc, LstmCache)>, Vec<f64>) {
        self.check(x);
        let mut state = LstmState::zeros(self.cfg.hidden);
        let mut tape = Vec::with_capacity(x.len());
        for (row, kind) in x.iter().zip(TokenKind::sequence(self.max_len)) {
            let (a, enc) = self.encode(kind, row);
            let (next, cache) = self.lstm.step(&state, &a);
            state = next;
            tape.push((enc, cache));
        }
        (self.head.forward(&state.h)[0], tape, state.h)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = CriticMeta {
            config: self.cfg.clone(),
            n_nodes: self.n_nodes,
            max_len: self.max_len,
        };
        Ok(Checkpoint::capture("critic", serde_json::to_value(meta)?, self))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != "critic" {
            return Err(Error::Checkpoint(format!("expected a critic checkpoint, got `{}`", ck.kind)));
        }
        let meta: CriticMeta = serde_json::from_value(ck.config.clone())?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut c = Self::new(meta.config, meta.n_nodes, meta.max_len, &mut rng)?;
        ck.restore(&mut c)?;
        Ok(c)
    }
}

impl Discriminator for Critic {
    fn score(&self, x: &[Vec<f64>]) -> f64 {
        self.forward(x).0
    }

    fn backprop(&mut self, x: &[Vec<f64>], d: f64, acc: bool) -> WalkInput {
        let (_, tape, h_last) = self.forward(x);
        let mut dh = self.head.backward(&h_last, &[d], acc);
        let mut dc = vec![0.0; self.cfg.hidden];
        let mut out = vec![Vec::new(); x.len()];
        for (k, (enc, cache)) in tape.iter().enumerate().rev() {
            let (da, dh_prev, dc_prev) = self.lstm.backward(cache, &dh, &dc, acc);
            out[k] = match enc {
                Enc::Flag(e) => {
                    let de = self.flag_enc.backward(e, &da, acc);
                    self.flag_emb.backward(&x[k], &de, acc)
                }
                Enc::Node(e) => {
                    let de = self.node_enc.backward(e, &da, acc);
                    self.node_emb.backward(&x[k], &de, acc)
                }
                Enc::Time => self.time_enc.backward(&x[k], &da, acc),
            };
            dh = dh_prev;
            dc = dc_prev;
        }
        out
    }
}
