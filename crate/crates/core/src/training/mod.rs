//! VAE pre-training, frozen-VAE alignment training, learning-rate schedule
//! and checkpoints.

mod align;
pub mod checkpoint;
mod config;
mod vae;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alignment::AlignError;
use crate::audio::AudioError;
use crate::latent::LatentError;
use crate::networks::NetworkError;
pub use align::{align_step, align_step_on_posteriors, alignment_loss_var, train_alignment, AlignReport, AlignTerms, TextState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use config::{lr_at, AlignTrainConfig, VaeTrainConfig};
pub use vae::{clip_mse, clip_range, generator_loss_var, train_vae, vae_step, GeneratorTerms, VaeReport, VaeState};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("no usable items in the batch ({skipped} skipped)")]
    NothingToTrain { skipped: usize },
    #[error("text and wave models disagree: {0}")]
    Incompatible(String),
    #[error("non-finite loss at step {0}")]
    NonFinite(u64),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("optimizer: {0}")]
    Optimizer(#[from] ktts_tensor::TensorError),
}

const SHUFFLE_SALT: u64 = 0x5eed_5a17_d1ce_0001;

/// Generator for the noise of global step `step`. Depends only on the seed
/// and the step, so a resumed run draws what an uninterrupted run would.
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

/// Item indices of the batch trained at global step `step`: each epoch is a
/// fresh seeded shuffle cut into consecutive batches, the last possibly
/// short. Returns the epoch as well.
pub fn batch_indices(n_items: usize, batch_size: usize, seed: u64, step: u64) -> (u64, Vec<usize>) {
    use rand::seq::SliceRandom;
    let per_epoch = n_items.div_ceil(batch_size).max(1) as u64;
    let epoch = step / per_epoch;
    let mut order: Vec<usize> = (0..n_items).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_SALT);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    let start = (step % per_epoch) as usize * batch_size;
    let end = (start + batch_size).min(n_items);
    (epoch, order[start..end].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_each_epoch_once() {
        for (n, bs) in [(8usize, 3usize), (18, 18), (5, 12), (10, 1)] {
            let per_epoch = n.div_ceil(bs) as u64;
            for epoch in 0..3u64 {
                let mut seen: Vec<usize> = (0..per_epoch)
                    .flat_map(|b| {
                        let (e, idx) = batch_indices(n, bs, 7, epoch * per_epoch + b);
                        assert_eq!(e, epoch);
                        idx
                    })
                    .collect();
                seen.sort();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn step_rng_is_a_pure_function() {
        use rand::Rng;
        let a: u64 = step_rng(3, 10).random();
        let b: u64 = step_rng(3, 10).random();
        let c: u64 = step_rng(3, 11).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
