use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fields::Schedule;
use crate::flow::{Latent, TimeGrid};

/// Noise-injected anchors `signal(t_k) z0 + noise(t_k) eps_k` for
/// `k = 0..=k_max`, with an independent standard-normal `eps_k` per step.
pub fn nsli_anchors(schedule: &Schedule, z0: &Latent, grid: &TimeGrid, k_max: usize, seed: u64) -> Result<Vec<Latent>> {
    if k_max > grid.n_steps() {
        return Err(Error::Index {
            index: k_max,
            len: grid.n_steps() + 1,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..=k_max)
        .map(|k| {
            let (signal, noise) = schedule.coefficients(grid.time(k)?);
            let values = z0
                .as_slice()
                .iter()
                .map(|x| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    signal * x + noise * e
                })
                .collect();
            Latent::new(values)
        })
        .collect()
}
