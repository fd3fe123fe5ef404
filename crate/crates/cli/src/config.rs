//! Run configuration: one TOML file with a section per stage. Command-line
//! flags are applied on top of the file.
//!
//! ```toml
//! seed = 7
//!
//! [synth]
//! n_nodes_target = 30
//! n_samples = 200
//!
//! [sampler]
//! max_len = 3
//! start_bias = "linear"
//!
//! [generator]
//! constraint = "nested_relu"
//!
//! [critic]
//! hidden = 40
//!
//! [train]
//! max_epochs = 100
//! early_stop = { patience = 5, eval_every = 10, n_eval_samples = 10 }
//!
//! [eval]
//! n_bins = 10
//! ```

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tggan_core::{CriticConfig, EvalConfig, GenConfig, SamplerConfig, SynthConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub sampler: SamplerConfig,
    pub generator: GenConfig,
    pub critic: CriticConfig,
    pub train: TrainConfig,
    /// Settings of the `evaluate` command. Training reads `train.eval`.
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Defaults, or the file when given.
    pub fn from_file(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Propagate shared values and check every section.
    pub fn resolve(mut self) -> anyhow::Result<Self> {
        self.train.seed = self.seed;
        if self.sampler.max_len != self.generator.max_len {
            bail!(
                "sampler.max_len ({}) and generator.max_len ({}) differ",
                self.sampler.max_len,
                self.generator.max_len
            );
        }
        self.synth.validate()?;
        self.sampler.validate()?;
        self.generator.validate()?;
        self.critic.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        Ok(self)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}
