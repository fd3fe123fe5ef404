use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::decode::MinimaxStats;
use super::{GenConfig, LatentDist, TimeDecoderKind};
use crate::error::{Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::deconv::DeconvCache;
use crate::nn::embedding::one_hot;
use crate::nn::{sigmoid, softplus, DeconvStack, Dense, Embedding, Lstm, LstmState, Module, Param};

/// Budget decoder head.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeDecoder {
    /// `mu(o) + softplus(s(o)) * n`, `n ~ N(0, 1)`.
    Gaussian { mu: Dense, sigma: Dense },
    /// Deconvolve `o` into a matrix, average randomly chosen rows and map
    /// the mean row to a scalar.
    Deep { deconv: DeconvStack, out: Dense },
}

impl Module for TimeDecoder {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Param)) {
        use crate::nn::join_name as j;
        match self {
            TimeDecoder::Gaussian { mu, sigma } => {
                mu.visit(&j(prefix, "mu"), f);
                sigma.visit(&j(prefix, "sigma"), f);
            }
            TimeDecoder::Deep { deconv, out } => {
                deconv.visit(&j(prefix, "deconv"), f);
                out.visit(&j(prefix, "out"), f);
            }
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        use crate::nn::join_name as j;
        match self {
            TimeDecoder::Gaussian { mu, sigma } => {
                mu.visit_mut(&j(prefix, "mu"), f);
                sigma.visit_mut(&j(prefix, "sigma"), f);
            }
            TimeDecoder::Deep { deconv, out } => {
                deconv.visit_mut(&j(prefix, "deconv"), f);
                out.visit_mut(&j(prefix, "out"), f);
            }
        }
    }
}

/// Forward record of one budget decode.
#[derive(Debug, Clone)]
pub enum TimeCache {
    Gaussian { s_pre: f64, n: f64 },
    Deep { cache: DeconvCache, rows: Vec<usize>, mean_row: Vec<f64> },
}

impl TimeDecoder {
    /// Gaussian decode with injected noise `n`.
    pub fn gaussian_with(&self, o: &[f64], n: f64) -> (f64, TimeCache) {
        let TimeDecoder::Gaussian { mu, sigma } = self else {
            panic!("not a Gaussian decoder")
        };
        let m = mu.forward(o)[0];
        let s_pre = sigma.forward(o)[0];
        (m + softplus(s_pre) * n, TimeCache::Gaussian { s_pre, n })
    }

    /// Deep decode over the given row indices (with repetition).
    pub fn deep_with(&self, o: &[f64], rows: Vec<usize>) -> (f64, TimeCache) {
        let TimeDecoder::Deep { deconv, out } = self else {
            panic!("not a deep decoder")
        };
        let (r, cache) = deconv.forward(o);
        let (_, d2) = deconv.output_shape();
        let mut mean_row = vec![0.0; d2];
        for &i in &rows {
            for (m, v) in mean_row.iter_mut().zip(&r[i * d2..(i + 1) * d2]) {
                *m += v;
            }
        }
        let k = rows.len() as f64;
        mean_row.iter_mut().for_each(|m| *m /= k);
        let t = out.forward(&mean_row)[0];
        (t, TimeCache::Deep { cache, rows, mean_row })
    }

    /// Decode a raw budget. Without noise the Gaussian head returns its mean
    /// and the deep head averages every row.
    pub fn forward<R: Rng + ?Sized>(&self, o: &[f64], cfg: &GenConfig, noise: bool, rng: &mut R) -> (f64, TimeCache) {
        match self {
            TimeDecoder::Gaussian { .. } => {
                let n = if noise { StandardNormal.sample(rng) } else { 0.0 };
                self.gaussian_with(o, n)
            }
            TimeDecoder::Deep { deconv, .. } => {
                let d1 = deconv.output_shape().0;
                let rows = if noise {
                    (0..cfg.n_rows).map(|_| rng.random_range(0..d1)).collect()
                } else {
                    (0..d1).collect()
                };
                self.deep_with(o, rows)
            }
        }
    }

    /// Returns `dL/do`.
    pub fn backward(&mut self, o: &[f64], cache: &TimeCache, d_raw: f64, acc: bool) -> Vec<f64> {
        match (self, cache) {
            (TimeDecoder::Gaussian { mu, sigma }, TimeCache::Gaussian { s_pre, n }) => {
                let mut d = mu.backward(o, &[d_raw], acc);
                let ds = sigma.backward(o, &[d_raw * n * sigmoid(*s_pre)], acc);
                d.iter_mut().zip(ds).for_each(|(a, b)| *a += b);
                d
            }
            (TimeDecoder::Deep { deconv, out }, TimeCache::Deep { cache, rows, mean_row }) => {
                let d_mean = out.backward(mean_row, &[d_raw], acc);
                let (d1, d2) = deconv.output_shape();
                let mut d_r = vec![0.0; d1 * d2];
                let k = rows.len() as f64;
                for &i in rows {
                    for (a, b) in d_r[i * d2..(i + 1) * d2].iter_mut().zip(&d_mean) {
                        *a += b / k;
                    }
                }
                deconv.backward(cache, &d_r, acc)
            }
            _ => panic!("time cache does not match decoder"),
        }
    }
}

/// Encoded input and the intermediate needed to backpropagate it.
#[derive(Debug, Clone)]
pub enum EncCache {
    Flag { s: Vec<f64>, e: Vec<f64> },
    Node { s: Vec<f64>, e: Vec<f64> },
    Time { t: f64 },
}

/// All generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub h0_c: Dense,
    pub h0_h: Dense,
    pub lstm: Lstm,
    pub flag_emb: Embedding,
    pub flag_enc: Dense,
    pub node_emb: Embedding,
    pub node_enc: Dense,
    pub time_enc: Dense,
    pub dec_x: Dense,
    pub dec_y: Dense,
    pub dec_v: Dense,
    pub time: TimeDecoder,
    cfg: GenConfig,
    n_nodes: usize,
    /// Minimax statistics per budget slot `t0..tL`, used outside training
    /// batches.
    pub minimax_stats: Vec<MinimaxStats>,
}

crate::impl_module!(Generator {
    h0_c, h0_h, lstm, flag_emb, flag_enc, node_emb, node_enc, time_enc, dec_x, dec_y, dec_v, time
});

#[derive(Serialize, Deserialize)]
struct GenMeta {
    config: GenConfig,
    n_nodes: usize,
    minimax_stats: Vec<MinimaxStats>,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(cfg: GenConfig, n_nodes: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if n_nodes == 0 {
            return Err(Error::Config("node universe is empty".into()));
        }
        let (h, i) = (cfg.hidden, cfg.input_dim);
        let time = match cfg.time_decoder {
            TimeDecoderKind::GaussianParam => TimeDecoder::Gaussian {
                mu: Dense::new(h, 1, rng),
                sigma: Dense::new(h, 1, rng),
            },
            TimeDecoderKind::DeepSampler => TimeDecoder::Deep {
                deconv: DeconvStack::standard(h, cfg.deconv_rows, cfg.deconv_cols, cfg.deconv_channels, rng)?,
                out: Dense::new(cfg.deconv_cols, 1, rng),
            },
        };
        Ok(Self {
            h0_c: Dense::new(cfg.latent_dim, h, rng),
            h0_h: Dense::new(cfg.latent_dim, h, rng),
            lstm: Lstm::new(i, h, rng),
            flag_emb: Embedding::new(2, cfg.flag_embed, rng),
            flag_enc: Dense::new(cfg.flag_embed, i, rng),
            node_emb: Embedding::new(n_nodes, cfg.node_embed, rng),
            node_enc: Dense::new(cfg.node_embed, i, rng),
            time_enc: Dense::new(1, i, rng),
            dec_x: Dense::new(h, 2, rng),
            dec_y: Dense::new(h, 2, rng),
            dec_v: Dense::new(h, n_nodes, rng),
            time,
            minimax_stats: vec![MinimaxStats::identity(); cfg.max_len + 1],
            cfg,
            n_nodes,
        })
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut GenConfig {
        &mut self.cfg
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn sample_z<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.cfg.latent_dim)
            .map(|_| match self.cfg.z_dist {
                LatentDist::Uniform => rng.random_range(-1.0..1.0),
                LatentDist::Gaussian => StandardNormal.sample(rng),
            })
            .collect()
    }

    /// Initial memory `(c, h) = (W_c z + b_c, tanh(W_h z + b_h))`.
    pub fn initial_state(&self, z: &[f64]) -> LstmState {
        LstmState {
            c: self.h0_c.forward(z),
            h: self.h0_h.forward(z).into_iter().map(f64::tanh).collect(),
        }
    }

    pub(crate) fn initial_backward(&mut self, z: &[f64], h0: &[f64], dc: &[f64], dh: &[f64]) {
        self.h0_c.backward(z, dc, true);
        let dpre: Vec<f64> = dh.iter().zip(h0).map(|(d, h)| d * (1.0 - h * h)).collect();
        self.h0_h.backward(z, &dpre, true);
    }

    pub fn encode_flag(&self, s: &[f64]) -> (Vec<f64>, EncCache) {
        let e = self.flag_emb.forward(s);
        (self.flag_enc.forward(&e), EncCache::Flag { s: s.to_vec(), e })
    }

    pub fn encode_node(&self, s: &[f64]) -> (Vec<f64>, EncCache) {
        let e = self.node_emb.forward(s);
        (self.node_enc.forward(&e), EncCache::Node { s: s.to_vec(), e })
    }

    pub fn encode_time(&self, t: f64) -> (Vec<f64>, EncCache) {
        (self.time_enc.forward(&[t]), EncCache::Time { t })
    }

    pub fn encode_flag_id(&self, id: usize) -> (Vec<f64>, EncCache) {
        self.encode_flag(&one_hot(id, 2))
    }

    pub fn encode_node_id(&self, id: usize) -> (Vec<f64>, EncCache) {
        self.encode_node(&one_hot(id, self.n_nodes))
    }

    /// Backpropagate through an encoder; returns the gradient w.r.t. the
    /// encoded value (indicator vector or scalar).
    pub(crate) fn encode_backward(&mut self, cache: &EncCache, d_a: &[f64]) -> Vec<f64> {
        match cache {
            EncCache::Flag { s, e } => {
                let de = self.flag_enc.backward(e, d_a, true);
                self.flag_emb.backward(s, &de, true)
            }
            EncCache::Node { s, e } => {
                let de = self.node_enc.backward(e, d_a, true);
                self.node_emb.backward(s, &de, true)
            }
            EncCache::Time { t } => self.time_enc.backward(&[*t], d_a, true),
        }
    }

    /// Blend `stats` into the stored minimax statistics.
    pub fn update_minimax_stats(&mut self, batch: &[Option<MinimaxStats>], momentum: f64) {
        for (run, b) in self.minimax_stats.iter_mut().zip(batch) {
            if let Some(b) = b {
                run.shift = (1.0 - momentum) * run.shift + momentum * b.shift;
                run.scale = (1.0 - momentum) * run.scale + momentum * b.scale;
            }
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = GenMeta {
            config: self.cfg.clone(),
            n_nodes: self.n_nodes,
            minimax_stats: self.minimax_stats.clone(),
        };
        Ok(Checkpoint::capture("generator", serde_json::to_value(meta)?, self))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != "generator" {
            return Err(Error::Checkpoint(format!("expected a generator checkpoint, got `{}`", ck.kind)));
        }
        let meta: GenMeta = serde_json::from_value(ck.config.clone())?;
        // Any rng works here: every value is overwritten by the restore.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut g = Self::new(meta.config, meta.n_nodes, &mut rng)?;
        ck.restore(&mut g)?;
        if meta.minimax_stats.len() != g.minimax_stats.len() {
            return Err(Error::Checkpoint("minimax statistics do not match max_len".into()));
        }
        g.minimax_stats = meta.minimax_stats;
        Ok(g)
    }
}
