//! The trainable blocks and the discriminator.
//!
//! Every block reads its weights from a [`ParameterStore`] under a fixed
//! prefix (`text_encoder.`, `wave_encoder.`, `wave_decoder.`, `duration.`,
//! `discriminator.`). The block modules' `forward` functions work on a
//! [`Graph`] for training; the free functions here evaluate once and return plain values.

pub mod config;
pub mod discriminator;
pub mod duration;
pub mod layers;
pub mod text_encoder;
pub mod wave_decoder;
pub mod wave_encoder;

use ktts_tensor::{Bound, Graph, Tensor, Var};
pub use ktts_tensor::ParameterStore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::Waveform;
use crate::latent::{DiagGaussianSeq, LatentError, LatentSeq};
use crate::phonemizer::PhonemeSeq;
pub use config::{
    DiscriminatorConfig, DurationPredictorConfig, FeatureEncoderConfig, TextEncoderConfig, TextNetConfig,
    TransformerConfig, VaeNetConfig, WaveDecoderConfig, WaveEncoderConfig,
};
use layers::Init;

/// Longest latent slice the decoder accepts in one call.
pub const MAX_SLICE_FRAMES: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("phoneme id {id} at position {position} is outside the embedding table of {vocab}")]
    TokenOutOfRange { id: usize, position: usize, vocab: usize },
    #[error("empty phoneme sequence")]
    NoTokens,
    #[error("waveform of {len} samples is shorter than the {min}-sample receptive field")]
    TooShort { len: usize, min: usize },
    #[error("latent slice of {frames} frames; the decoder takes 1 to {max}")]
    SliceLength { frames: usize, max: usize },
    #[error("expected {expected} latent channels, got {got}")]
    Channels { expected: usize, got: usize },
    #[error(transparent)]
    Latent(#[from] LatentError),
}

/// Fresh VAE-phase parameters.
pub fn init_vae(cfg: &VaeNetConfig, seed: u64) -> Result<ParameterStore, NetworkError> {
    cfg.validate()?;
    let mut store = ParameterStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = Init {
        store: &mut store,
        rng: &mut rng,
    };
    wave_encoder::init(&mut init, &cfg.wave_encoder);
    wave_decoder::init(&mut init, &cfg.wave_decoder);
    discriminator::init(&mut init, &cfg.discriminator);
    Ok(store)
}

/// Fresh alignment-phase parameters.
pub fn init_text(cfg: &TextNetConfig, seed: u64) -> Result<ParameterStore, NetworkError> {
    cfg.validate()?;
    let mut store = ParameterStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = Init {
        store: &mut store,
        rng: &mut rng,
    };
    text_encoder::init(&mut init, &cfg.text_encoder);
    duration::init(&mut init, &cfg.duration);
    Ok(store)
}

pub(crate) fn waveform_var<'g>(graph: &'g Graph, samples: &[f64]) -> Var<'g> {
    graph.constant(Tensor::new(vec![1, samples.len()], samples.to_vec()))
}

pub(crate) fn check_ids(ids: &[usize], vocab: usize) -> Result<(), NetworkError> {
    if ids.is_empty() {
        return Err(NetworkError::NoTokens);
    }
    match ids.iter().position(|&id| id >= vocab) {
        Some(position) => Err(NetworkError::TokenOutOfRange {
            id: ids[position],
            position,
            vocab,
        }),
        None => Ok(()),
    }
}

fn check_waveform(w: &Waveform, cfg: &FeatureEncoderConfig) -> Result<(), NetworkError> {
    let min = cfg.receptive_field();
    if w.len() < min {
        return Err(NetworkError::TooShort { len: w.len(), min });
    }
    Ok(())
}

/// Prior over text tokens and the hidden representation `[model_dim, tokens]`.
pub fn text_encode(
    params: &ParameterStore,
    cfg: &TextEncoderConfig,
    phonemes: &PhonemeSeq,
) -> Result<(DiagGaussianSeq, Tensor), NetworkError> {
    check_ids(phonemes.ids(), cfg.vocab_size)?;
    let graph = Graph::new();
    let p = Bound::new(&graph, params, false);
    let out = text_encoder::forward(&p, phonemes.ids(), cfg);
    let prior = DiagGaussianSeq::from_log_std((*out.mean.value()).clone(), &out.log_std.value())?;
    Ok((prior, (*out.hidden.value()).clone()))
}

/// Feature-encoder tokens, `[channels, frames]`.
pub fn feature_encode(
    params: &ParameterStore,
    cfg: &FeatureEncoderConfig,
    w: &Waveform,
) -> Result<Tensor, NetworkError> {
    check_waveform(w, cfg)?;
    let graph = Graph::new();
    let p = Bound::new(&graph, params, false);
    let out = wave_encoder::features(&p, waveform_var(&graph, w.samples()), cfg);
    Ok((*out.value()).clone())
}

/// Posterior over latent frames.
pub fn wave_encode(
    params: &ParameterStore,
    cfg: &WaveEncoderConfig,
    w: &Waveform,
) -> Result<DiagGaussianSeq, NetworkError> {
    check_waveform(w, &cfg.feature)?;
    let graph = Graph::new();
    let p = Bound::new(&graph, params, false);
    let (mean, log_std) = wave_encoder::forward(&p, waveform_var(&graph, w.samples()), cfg);
    let mean = (*mean.value()).clone();
    Ok(DiagGaussianSeq::from_log_std(mean, &log_std.value())?)
}

/// Decodes one slice of at most [`MAX_SLICE_FRAMES`] frames.
pub fn wave_decode(
    params: &ParameterStore,
    cfg: &WaveDecoderConfig,
    z: &LatentSeq,
) -> Result<Waveform, NetworkError> {
    let frames = z.frames();
    if frames == 0 || frames > MAX_SLICE_FRAMES {
        return Err(NetworkError::SliceLength {
            frames,
            max: MAX_SLICE_FRAMES,
        });
    }
    if z.channels() != cfg.latent_channels {
        return Err(NetworkError::Channels {
            expected: cfg.latent_channels,
            got: z.channels(),
        });
    }
    let graph = Graph::new();
    let p = Bound::new(&graph, params, false);
    let out = wave_decoder::forward(&p, graph.constant(z.values().clone()), cfg);
    let samples = out.value().data().to_vec();
    Ok(Waveform::saturating(samples).expect("decoder output is non-empty"))
}

/// Real-valued frames per token for a hidden text representation.
pub fn predict_durations(params: &ParameterStore, cfg: &DurationPredictorConfig, hidden: &Tensor) -> Vec<f64> {
    let graph = Graph::new();
    let p = Bound::new(&graph, params, false);
    let out = duration::forward(&p, graph.constant(hidden.clone()), cfg);
    let durations = out.value().data().to_vec();
    durations
}

/// One realness score per sample.
pub fn discriminate(params: &ParameterStore, cfg: &DiscriminatorConfig, w: &Waveform) -> Vec<f64> {
    let graph = Graph::new();
    let p = Bound::new(&graph, params, false);
    let out = discriminator::forward(&p, waveform_var(&graph, w.samples()), cfg);
    let scores = out.value().data().to_vec();
    scores
}
