//! Shared fixtures for the benchmarks.

use ssacpd::{generate, SynthConfig, SynthDataset};

pub fn dataset(dim: usize, d_s: usize, n_epochs: usize, epoch_len: usize) -> SynthDataset {
    let cfg = SynthConfig { dim, d_s, d_n: dim - d_s, n_epochs, epoch_len, seed: 3, ..SynthConfig::default() };
    generate(&cfg).expect("benchmark dataset")
}
