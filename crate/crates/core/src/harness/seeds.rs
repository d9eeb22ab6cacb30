//! Master-seed expansion.
//!
//! Sample `i` of a run with master seed `m` uses `splitmix64(m, i)`: the
//! `(i + 1)`-th output of a SplitMix64 generator started at state `m`. The
//! NSLI anchor noise of that sample is seeded with the next output of a
//! generator started at the sample seed, so it never collides with the
//! stream that drew the sample itself.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::fields::GaussianModel;
use crate::flow::{Condition, Latent};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `index`-th SplitMix64 output from state `master`.
pub fn splitmix64(master: u64, index: u64) -> u64 {
    mix(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

pub fn sample_seed(master: u64, sample: usize) -> u64 {
    splitmix64(master, sample as u64)
}

pub fn nsli_seed(sample_seed: u64) -> u64 {
    splitmix64(sample_seed, 0)
}

/// Draw from the mixture component of `c`: `m_c + sigma * e`.
pub fn draw_source(model: &GaussianModel, c: &Condition, seed: u64) -> crate::Result<Latent> {
    let mean = model.mean(c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Latent::new(
        mean.iter()
            .map(|m| {
                let e: f64 = StandardNormal.sample(&mut rng);
                m + model.sigma() * e
            })
            .collect(),
    )
}
