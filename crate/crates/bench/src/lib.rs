//! Shared fixtures for the benchmarks and the quantization-ordering report.

use hbrb_core::evaluation::{clustered_corpus, ClusteredConfig};
use hbrb_core::{BinaryDescriptor, DescriptorSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const BITS: usize = 256;

/// `n` uniform random descriptors in groups of 100.
pub fn random_set(n: usize, seed: u64) -> DescriptorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let descs: Vec<_> = (0..n)
        .map(|_| BinaryDescriptor::random(BITS, &mut rng))
        .collect();
    let groups = descs.chunks(100).map(<[_]>::to_vec).collect();
    DescriptorSet::from_groups(BITS, groups).expect("random fixture")
}

/// `n` descriptors around `centers` prototypes with 10% bit noise, in groups of 100.
pub fn clustered_set(centers: usize, n: usize, seed: u64) -> DescriptorSet {
    clustered_corpus(&ClusteredConfig {
        centers,
        descriptors: n,
        bit_flip_prob: 0.1,
        descriptor_bits: BITS,
        group_size: 100,
        seed,
    })
    .expect("clustered fixture")
}

pub fn random_descriptors(n: usize, seed: u64) -> Vec<BinaryDescriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| BinaryDescriptor::random(BITS, &mut rng))
        .collect()
}
