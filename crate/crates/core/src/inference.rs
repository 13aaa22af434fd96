//! Text to waveform with a trained text prior and a pre-trained VAE.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alignment::{expand_by_durations, AlignError, Durations};
use crate::audio::Waveform;
use crate::latent::{sample_with, DiagGaussianSeq, LatentError};
use crate::networks::{self, NetworkError, MAX_SLICE_FRAMES};
use crate::phonemizer::{normalize_text, phonemize, PhonemeSeq, PhonemeTable, PhonemizeError};
use crate::training::{TextState, TrainError, VaeState};

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("invalid synthesis options: {0}")]
    Options(String),
    #[error(transparent)]
    Phonemize(#[from] PhonemizeError),
    #[error("incompatible checkpoints: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Align(#[from] AlignError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Scale on the prior standard deviation; 0 decodes the prior mean.
    pub temperature: f64,
    /// Latent frames per decoder call.
    pub slice_frames: usize,
    pub seed: u64,
    /// Multiplier on predicted durations before rounding.
    pub duration_scale: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            temperature: 0.667,
            slice_frames: MAX_SLICE_FRAMES,
            seed: 0,
            duration_scale: 1.0,
        }
    }
}

impl SynthesisOptions {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(InferenceError::Options(format!(
                "temperature must be a finite value >= 0, got {}",
                self.temperature
            )));
        }
        if self.slice_frames == 0 || self.slice_frames > MAX_SLICE_FRAMES {
            return Err(InferenceError::Options(format!(
                "slice size must be in 1..={MAX_SLICE_FRAMES}, got {}",
                self.slice_frames
            )));
        }
        if !(self.duration_scale > 0.0 && self.duration_scale.is_finite()) {
            return Err(InferenceError::Options(format!(
                "duration scale must be positive, got {}",
                self.duration_scale
            )));
        }
        Ok(())
    }
}

/// Integer frames per token: `max(1, round(scale * d))`, halves rounded away
/// from zero. Non-finite predictions count as one frame.
pub fn round_durations(predicted: &[f64], scale: f64) -> Durations {
    let d = predicted
        .iter()
        .map(|&x| {
            let r = (scale * x).round();
            if r.is_finite() && r >= 1.0 {
                r as usize
            } else {
                1
            }
        })
        .collect();
    Durations::new(d).expect("every duration is at least one frame")
}

/// `(start, end)` frame ranges of consecutive slices covering `frames`.
pub fn slice_bounds(frames: usize, slice: usize) -> Vec<(usize, usize)> {
    assert!(slice > 0, "slice size must be positive");
    (0..frames)
        .step_by(slice)
        .map(|s| (s, (s + slice).min(frames)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub waveform: Waveform,
    pub phonemes: PhonemeSeq,
    pub durations: Durations,
}

/// Read-only view of the two trained models.
#[derive(Debug, Clone, Copy)]
pub struct Synthesizer<'a> {
    text: &'a TextState,
    vae: &'a VaeState,
    table: &'a PhonemeTable,
}

impl<'a> Synthesizer<'a> {
    pub fn new(text: &'a TextState, vae: &'a VaeState, table: &'a PhonemeTable) -> Result<Self, InferenceError> {
        text.check_compatible(&vae.config.net).map_err(|e| match e {
            TrainError::Incompatible(m) => InferenceError::Incompatible(m),
            other => InferenceError::Incompatible(other.to_string()),
        })?;
        let vocab = text.config.net.text_encoder.vocab_size;
        if vocab != table.vocab_size() {
            return Err(InferenceError::Incompatible(format!(
                "text encoder expects {vocab} symbols, the phoneme table has {}",
                table.vocab_size()
            )));
        }
        Ok(Self { text, vae, table })
    }

    fn encode(&self, phonemes: &PhonemeSeq) -> Result<(DiagGaussianSeq, Vec<f64>), InferenceError> {
        let net = &self.text.config.net;
        let (prior, hidden) = networks::text_encode(&self.text.params, &net.text_encoder, phonemes)?;
        let frames = networks::predict_durations(&self.text.params, &net.duration, &hidden)
            .into_iter()
            .map(|raw| self.text.config.frames_from_prediction(raw))
            .collect();
        Ok((prior, frames))
    }

    /// Frames per token predicted for `phonemes`, before rounding.
    pub fn predict(&self, phonemes: &PhonemeSeq) -> Result<Vec<f64>, InferenceError> {
        Ok(self.encode(phonemes)?.1)
    }

    pub fn synthesize(&self, text: &str, opts: &SynthesisOptions) -> Result<Synthesis, InferenceError> {
        let phonemes = phonemize(&normalize_text(text)?, self.table)?;
        self.synthesize_phonemes(phonemes, opts)
    }

    pub fn synthesize_phonemes(&self, phonemes: PhonemeSeq, opts: &SynthesisOptions) -> Result<Synthesis, InferenceError> {
        opts.validate()?;
        if phonemes.is_empty() {
            return Err(InferenceError::Network(NetworkError::NoTokens));
        }
        let (prior, predicted) = self.encode(&phonemes)?;
        let durations = round_durations(&predicted, opts.duration_scale);
        let expanded = expand_by_durations(&prior, &durations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let z = sample_with(&expanded, opts.temperature, &mut rng);

        let decoder = &self.vae.config.net.wave_decoder;
        let mut samples = Vec::with_capacity(z.frames() * decoder.upsample_factor());
        for (start, end) in slice_bounds(z.frames(), opts.slice_frames) {
            let piece = networks::wave_decode(&self.vae.params, decoder, &z.slice(start, end)?)?;
            samples.extend_from_slice(piece.samples());
        }
        let waveform = Waveform::new(samples).expect("decoder output is bounded and non-empty");
        Ok(Synthesis {
            waveform,
            phonemes,
            durations,
        })
    }
}

/// Normalizes and phonemizes `text` with the built-in table, then
/// synthesizes it.
pub fn synthesize(
    text: &str,
    text_state: &TextState,
    vae_state: &VaeState,
    opts: &SynthesisOptions,
) -> Result<Synthesis, InferenceError> {
    let table = PhonemeTable::sorani();
    Synthesizer::new(text_state, vae_state, &table)?.synthesize(text, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_clamps_and_rounds_half_away() {
        assert_eq!(round_durations(&[1.4, 2.6], 1.0).as_slice(), &[1, 3]);
        assert_eq!(round_durations(&[2.5, 0.2, -3.0, f64::NAN], 1.0).as_slice(), &[3, 1, 1, 1]);
        assert_eq!(round_durations(&[1.25], 2.0).as_slice(), &[3]);
    }

    #[test]
    fn slices_cover_frames() {
        assert_eq!(slice_bounds(65, 32), vec![(0, 32), (32, 64), (64, 65)]);
        assert_eq!(slice_bounds(32, 32), vec![(0, 32)]);
        assert_eq!(slice_bounds(3, 1).len(), 3);
    }

    #[test]
    fn options_validation() {
        assert!(SynthesisOptions::default().validate().is_ok());
        let bad = SynthesisOptions {
            slice_frames: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SynthesisOptions {
            temperature: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
