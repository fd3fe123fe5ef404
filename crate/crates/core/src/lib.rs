//! Continuous-time temporal graph generation.
//!
//! The crate samples truncated temporal random walks from observed graphs,
//! trains a recurrent walk generator against a Wasserstein critic, assembles
//! generated walks back into temporal graphs and scores generated graphs
//! against real ones with kernel two-sample distances over temporal-network
//! measures.

pub mod adversarial;
pub mod error;
pub mod generator;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{
    assemble, from_budget, recover_continuous, to_budget, to_snapshots, validate_walk, Assembly, AssemblySpec,
    BudgetEdge, Dataset, NodeId, SnapshotSequence, TemporalEdge, TemporalGraphSample, TemporalWalk, TruncatedWalk,
    ValidityReport, Walk, WalkProfile,
};
pub use sampler::{SamplerConfig, StartBias, WalkSampler};
pub use synth::SynthConfig;
pub use adversarial::{Critic, CriticConfig, EarlyStop, TrainConfig, TrainHistory, TrainOutcome};
pub use generator::{Constraint, GenConfig, Generator, LatentDist, SoftPath, TimeDecoderKind};
pub use metrics::{EvalConfig, Kernel, MetricReport};
pub use nn::checkpoint::Checkpoint;
