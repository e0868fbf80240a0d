use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{add_grads, Grads};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Sequential, bit-reproducible training. When unset, each batch is split
    /// into a fixed number of chunks evaluated on the rayon pool.
    pub deterministic: bool,
    /// Early-stopping patience on validation loss, in epochs. Only used by
    /// trainers that receive a validation split.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            deterministic: true,
            patience: Some(10),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if self.adam_epsilon <= 0.0 {
            return Err(Error::invalid("adam_epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(config: &TrainConfig, shapes: &Grads) -> Self {
        let zeros: Grads = shapes.iter().map(|g| vec![0.0; g.len()]).collect();
        Adam {
            lr: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_epsilon,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut Vec<f64>>, grads: &Grads) {
        self.t += 1;
        if self.lr == 0.0 {
            return;
        }
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Number of chunks a batch is split into for parallel accumulation. Fixed so
/// the summation order never depends on the thread count.
const PARALLEL_CHUNKS: usize = 4;

/// Evaluates `f` for every sample in `batch`, summing gradients.
///
/// Returns the summed gradients and `(sample, loss)` pairs in batch order.
pub(crate) fn accumulate<F>(
    batch: &[usize],
    deterministic: bool,
    template: &Grads,
    f: F,
) -> (Grads, Vec<(usize, f64)>)
where
    F: Fn(usize, &mut Grads) -> f64 + Sync,
{
    let zeros = || -> Grads { template.iter().map(|g| vec![0.0; g.len()]).collect() };
    let run_chunk = |chunk: &[usize]| {
        let mut g = zeros();
        let losses: Vec<_> = chunk.iter().map(|&i| (i, f(i, &mut g))).collect();
        (g, losses)
    };
    if deterministic || batch.len() < 2 {
        return run_chunk(batch);
    }
    let chunk = batch.len().div_ceil(PARALLEL_CHUNKS);
    let parts: Vec<_> = batch.par_chunks(chunk).map(run_chunk).collect();
    let mut grads = zeros();
    let mut losses = Vec::with_capacity(batch.len());
    for (g, l) in parts {
        add_grads(&mut grads, &g);
        losses.extend(l);
    }
    (grads, losses)
}

/// Seeded per-epoch shuffles of `0..n`.
pub(crate) struct EpochShuffler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
}

impl EpochShuffler {
    pub fn new(n: usize, seed: u64) -> Self {
        EpochShuffler {
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_ba7c4),
            order: (0..n).collect(),
        }
    }

    pub fn next_epoch(&mut self) -> &[usize] {
        self.order.shuffle(&mut self.rng);
        &self.order
    }
}

/// Deterministic per-sample RNG so dropout masks do not depend on batch order
/// or scheduling.
pub(crate) fn sample_rng(seed: u64, epoch: usize, sample: usize) -> ChaCha8Rng {
    let mix = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((epoch as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add((sample as u64).wrapping_mul(0x94D0_49BB_1331_11EB));
    ChaCha8Rng::seed_from_u64(mix)
}

/// Mean of per-sample losses summed in sample-index order, so the value is
/// independent of shuffling.
pub(crate) fn ordered_mean(per_sample: &[f64]) -> f64 {
    per_sample.iter().sum::<f64>() / per_sample.len() as f64
}
