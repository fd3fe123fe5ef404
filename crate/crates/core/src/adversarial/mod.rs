//! Walk critic and Wasserstein training with gradient penalty.
//!
//! Real walks and generated walks go through the same token layout: one
//! row per token, indicator vectors for flags and node ids and a scalar per
//! budget. Training alternates `n_critic` critic updates with one generator
//! update and keeps the parameters that scored best on the held-out
//! average-degree distance.

mod critic;
mod train;

pub use critic::{encode_fake, encode_real, gradient_penalty, Critic, CriticConfig, Discriminator, WalkInput};
pub use train::{
    assembly_spec, critic_gradients, critic_step, generate_samples, generator_gradients, generator_step, train,
    train_with, CriticStats, EarlyStop, HistoryRow, TrainConfig, TrainHistory, TrainOutcome, GP_FD_STEP,
};
