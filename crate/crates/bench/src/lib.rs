//! Shared fixtures for benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tggan_core::synth::generate_dataset;
use tggan_core::{Dataset, GenConfig, Generator, SynthConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Synthetic dataset of `n_samples` graphs over roughly `n_nodes` nodes.
pub fn dataset(n_nodes: usize, n_samples: usize) -> Dataset {
    let cfg = SynthConfig {
        n_nodes_target: n_nodes,
        n_samples,
        ..Default::default()
    };
    generate_dataset(&cfg, &mut rng(1)).expect("valid synthetic config")
}

pub fn generator(n_nodes: usize) -> Generator {
    Generator::new(GenConfig::default(), n_nodes, &mut rng(2)).expect("valid generator config")
}
