//! Recurrent walk generator.
//!
//! One LSTM emits a truncated walk token by token:
//!
//! ```text
//! x, t0, u1, v1, t1, ..., uL, vL, tL, y
//! ```
//!
//! Flags and node ids are decoded with the Gumbel-max trick, budgets with a
//! Gaussian or a deconvolutional sampler followed by an activation that keeps
//! them inside `[0, t_prev]`. Each decoded token is re-encoded and fed back
//! as the next input. Longer walks are grown one edge at a time by replaying
//! a sliding window of the walk through the same network.

mod decode;
mod model;
mod unroll;
mod walk;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decode::{
    constrain, decode_categorical, gumbel, minimax_bound, soft_backward, CategoricalSample, ConstraintGrad,
    MinimaxStats, SLACK,
};
pub use model::{Generator, TimeCache, TimeDecoder};
pub use unroll::{hard_indicators, BatchTape, GradIn, SoftWalk, Token, TokenKind, TokenValue};
pub use walk::{extend_walk, generate_full_walk, generate_graph, reference_full_walk, GeneratedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LatentDist {
    #[default]
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeDecoderKind {
    #[default]
    GaussianParam,
    DeepSampler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Clip,
    #[default]
    NestedRelu,
    Minimax,
}

/// Relaxation used on the gradient path of categorical samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SoftPath {
    #[default]
    Softmax,
    Tanh,
}

macro_rules! impl_from_str {
    ($ty:ty { $($s:literal => $v:expr),* $(,)? }) => {
        impl std::str::FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)*
                    _ => Err(Error::Config(format!("unknown {} `{s}`", stringify!($ty)))),
                }
            }
        }
    };
}

impl_from_str!(LatentDist { "uniform" => LatentDist::Uniform, "gaussian" => LatentDist::Gaussian });
impl_from_str!(TimeDecoderKind {
    "gaussian_param" => TimeDecoderKind::GaussianParam,
    "deep_sampler" => TimeDecoderKind::DeepSampler,
});
impl_from_str!(Constraint {
    "clip" => Constraint::Clip,
    "nested_relu" => Constraint::NestedRelu,
    "minimax" => Constraint::Minimax,
});
impl_from_str!(SoftPath { "softmax" => SoftPath::Softmax, "tanh" => SoftPath::Tanh });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Edges per truncated walk.
    pub max_len: usize,
    pub latent_dim: usize,
    pub z_dist: LatentDist,
    /// LSTM hidden size.
    pub hidden: usize,
    /// Width of every encoder output, i.e. the LSTM input size.
    pub input_dim: usize,
    pub flag_embed: usize,
    pub node_embed: usize,
    pub time_decoder: TimeDecoderKind,
    pub constraint: Constraint,
    pub soft_path: SoftPath,
    pub tau0: f64,
    pub tau_decay: f64,
    pub minimax_eps: f64,
    /// Subtract the minimum without adding `minimax_eps` back.
    pub minimax_shift_only: bool,
    /// Rows averaged by the deep sampler.
    pub n_rows: usize,
    pub deconv_rows: usize,
    pub deconv_cols: usize,
    pub deconv_channels: usize,
    /// Edge cap for full-walk generation.
    pub max_walk_len: usize,
    /// Feed `v_i` as `u_{i+1}` instead of sampling it.
    pub force_connectivity: bool,
    /// Sampling noise (Gumbel, Gaussian and row selection). When off the
    /// generator is deterministic given `z`.
    pub noise: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_len: 3,
            latent_dim: 16,
            z_dist: LatentDist::Uniform,
            hidden: 50,
            input_dim: 32,
            flag_embed: 4,
            node_embed: 16,
            time_decoder: TimeDecoderKind::GaussianParam,
            constraint: Constraint::NestedRelu,
            soft_path: SoftPath::Softmax,
            tau0: 5.0,
            tau_decay: 0.99,
            minimax_eps: 1e-3,
            minimax_shift_only: false,
            n_rows: 4,
            deconv_rows: 32,
            deconv_cols: 16,
            deconv_channels: 4,
            max_walk_len: 20,
            force_connectivity: false,
            noise: true,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=20).contains(&self.max_len) {
            return bad(format!("max_len {} not in 1..=20", self.max_len));
        }
        for (name, v) in [
            ("latent_dim", self.latent_dim),
            ("hidden", self.hidden),
            ("input_dim", self.input_dim),
            ("flag_embed", self.flag_embed),
            ("node_embed", self.node_embed),
            ("n_rows", self.n_rows),
            ("deconv_channels", self.deconv_channels),
            ("max_walk_len", self.max_walk_len),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return bad(format!("tau0 {} must be positive", self.tau0));
        }
        if !(self.tau_decay > 0.0 && self.tau_decay <= 1.0) {
            return bad(format!("tau_decay {} not in (0, 1]", self.tau_decay));
        }
        if !(self.minimax_eps >= 0.0) {
            return bad("minimax_eps must be non-negative".into());
        }
        if self.time_decoder == TimeDecoderKind::DeepSampler
            && (!self.deconv_rows.is_multiple_of(4) || !self.deconv_cols.is_multiple_of(4) || self.deconv_rows == 0 || self.deconv_cols == 0)
        {
            return bad(format!(
                "deconv output {}x{} must be a positive multiple of 4 in each dimension",
                self.deconv_rows, self.deconv_cols
            ));
        }
        Ok(())
    }

    /// Number of decoded tokens per truncated walk.
    pub fn n_tokens(&self) -> usize {
        3 * self.max_len + 3
    }

    /// Temperature after `epoch` decay steps.
    pub fn tau_at(&self, epoch: usize) -> f64 {
        self.tau0 * self.tau_decay.powi(epoch as i32)
    }
}
