use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tggan_core::sampler::StartBias;
use tggan_core::{Constraint, Kernel, LatentDist, SoftPath, TimeDecoderKind};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "tggan", version, about = "Simulate, train on and generate continuous-time temporal graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic scale-free temporal graph dataset.
    Simulate(SimulateArgs),
    /// Draw truncated temporal walks from a dataset.
    Sample(SampleArgs),
    /// Train a walk generator on a dataset.
    Train(TrainArgs),
    /// Assemble graph samples from a trained generator.
    Generate(GenerateArgs),
    /// Compare generated samples with real ones.
    Evaluate(EvaluateArgs),
    /// Render samples as an SVG arc diagram.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    pub fn load(&self) -> anyhow::Result<RunConfig> {
        let mut c = RunConfig::from_file(self.config.as_deref())?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta_in: Option<f64>,
    #[arg(long)]
    pub delta_out: Option<f64>,
    /// Raw time span shared by all samples.
    #[arg(long)]
    pub max_time: Option<f64>,
    /// Stop each sample at this many edges.
    #[arg(long)]
    pub max_edges: Option<usize>,
    /// Reuse the event-type draw as the time increment.
    #[arg(long)]
    pub reuse_draw: bool,
    #[arg(short, long)]
    pub out: PathBuf,
}

impl SimulateArgs {
    pub fn apply(&self, c: &mut RunConfig) {
        let s = &mut c.synth;
        set(&mut s.n_nodes_target, self.nodes);
        set(&mut s.n_samples, self.samples);
        set(&mut s.alpha, self.alpha);
        set(&mut s.beta, self.beta);
        set(&mut s.gamma, self.gamma);
        set(&mut s.delta_in, self.delta_in);
        set(&mut s.delta_out, self.delta_out);
        set(&mut s.max_time_raw, self.max_time);
        if self.max_edges.is_some() {
            s.max_edges = self.max_edges;
        }
        s.reuse_draw |= self.reuse_draw;
    }
}

#[derive(Debug, Args)]
pub struct SamplerFlags {
    /// Edges per truncated walk, for both sampler and generator.
    #[arg(long)]
    pub walk_len: Option<usize>,
    #[arg(long, value_parser = parse_with::<StartBias>)]
    pub start_bias: Option<StartBias>,
    #[arg(long)]
    pub jump_epsilon: Option<f64>,
    #[arg(long)]
    pub decay_lambda: Option<f64>,
    #[arg(long)]
    pub bias_on_raw_time: bool,
}

impl SamplerFlags {
    pub fn apply(&self, c: &mut RunConfig) {
        if let Some(l) = self.walk_len {
            c.sampler.max_len = l;
            c.generator.max_len = l;
        }
        set(&mut c.sampler.start_bias, self.start_bias);
        set(&mut c.sampler.jump_epsilon, self.jump_epsilon);
        set(&mut c.sampler.decay_lambda, self.decay_lambda);
        c.sampler.bias_on_raw_time |= self.bias_on_raw_time;
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerFlags,
    /// Edge-list dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of walks.
    #[arg(short, long, default_value_t = 1000)]
    pub n: usize,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GeneratorFlags {
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long, value_parser = parse_with::<LatentDist>)]
    pub z_dist: Option<LatentDist>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, value_parser = parse_with::<TimeDecoderKind>)]
    pub time_decoder: Option<TimeDecoderKind>,
    #[arg(long, value_parser = parse_with::<Constraint>)]
    pub constraint: Option<Constraint>,
    #[arg(long, value_parser = parse_with::<SoftPath>)]
    pub soft_path: Option<SoftPath>,
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    pub tau_decay: Option<f64>,
    #[arg(long)]
    pub force_connectivity: bool,
    #[arg(long)]
    pub critic_hidden: Option<usize>,
}

impl GeneratorFlags {
    pub fn apply(&self, c: &mut RunConfig) {
        let g = &mut c.generator;
        set(&mut g.latent_dim, self.latent_dim);
        set(&mut g.z_dist, self.z_dist);
        set(&mut g.hidden, self.hidden);
        set(&mut g.time_decoder, self.time_decoder);
        set(&mut g.constraint, self.constraint);
        set(&mut g.soft_path, self.soft_path);
        set(&mut g.tau0, self.tau0);
        set(&mut g.tau_decay, self.tau_decay);
        g.force_connectivity |= self.force_connectivity;
        set(&mut c.critic.hidden, self.critic_hidden);
    }
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub n_critic: Option<usize>,
    #[arg(long)]
    pub gp_lambda: Option<f64>,
    #[arg(long)]
    pub l2_disc: Option<f64>,
    #[arg(long)]
    pub l2_gen: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub n_eval_samples: Option<usize>,
    #[arg(long)]
    pub split_ratio: Option<f64>,
    /// Give the critic relaxed categorical samples instead of hard ones.
    #[arg(long)]
    pub soft_fake_inputs: bool,
    #[arg(long)]
    pub minimax_momentum: Option<f64>,
    /// Keep generated walks whose edges do not chain.
    #[arg(long)]
    pub allow_disconnected: bool,
}

impl TrainFlags {
    pub fn apply(&self, c: &mut RunConfig) {
        let t = &mut c.train;
        set(&mut t.lr, self.lr);
        set(&mut t.beta1, self.beta1);
        set(&mut t.beta2, self.beta2);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.n_critic, self.n_critic);
        set(&mut t.gp_lambda, self.gp_lambda);
        set(&mut t.l2_disc, self.l2_disc);
        set(&mut t.l2_gen, self.l2_gen);
        set(&mut t.max_epochs, self.epochs);
        set(&mut t.early_stop.patience, self.patience);
        set(&mut t.early_stop.eval_every, self.eval_every);
        set(&mut t.early_stop.n_eval_samples, self.n_eval_samples);
        set(&mut t.split_ratio, self.split_ratio);
        if self.soft_fake_inputs {
            t.hard_fake_inputs = false;
        }
        set(&mut t.minimax_momentum, self.minimax_momentum);
        if self.allow_disconnected {
            t.require_connected = false;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerFlags,
    #[command(flatten)]
    pub generator: GeneratorFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for checkpoints, history and the held-out split.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Generator checkpoint.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Number of graph samples.
    #[arg(short, long, default_value_t = 10)]
    pub n: usize,
    /// Reference dataset supplying the edge target and time span.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Edges per sample; overrides the reference dataset.
    #[arg(long)]
    pub edges: Option<usize>,
    /// Walks per sample; defaults to the edge target.
    #[arg(long)]
    pub walks: Option<usize>,
    /// Raw time span of the output; overrides the reference dataset.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub allow_disconnected: bool,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub gen: PathBuf,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Contact duration in normalized time.
    #[arg(long)]
    pub delta: Option<f64>,
    /// `median` or `rbf:<sigma>`.
    #[arg(long, value_parser = parse_with::<Kernel>)]
    pub kernel: Option<Kernel>,
    /// CSV report; a JSON twin is written next to it.
    #[arg(short, long)]
    pub out: PathBuf,
}

impl EvaluateArgs {
    pub fn apply(&self, c: &mut RunConfig) {
        set(&mut c.eval.n_bins, self.bins);
        if self.delta.is_some() {
            c.eval.delta = self.delta;
        }
        set(&mut c.eval.kernel, self.kernel);
    }
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(short, long)]
    pub out: PathBuf,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_with<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}
