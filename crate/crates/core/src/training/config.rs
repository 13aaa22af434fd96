use ktts_tensor::AdamConfig;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::audio::StftLossConfig;
use crate::networks::{TextNetConfig, VaeNetConfig};

fn default_decay() -> f64 {
    0.999f64.powf(1.0 / 8.0)
}

/// `initial * decay^epoch`.
pub fn lr_at(initial: f64, decay_per_epoch: f64, epoch: u64) -> f64 {
    initial * decay_per_epoch.powf(epoch as f64)
}

fn check_positive(name: &str, v: f64) -> Result<(), TrainError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(TrainError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn check_beta(name: &str, v: f64) -> Result<(), TrainError> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(TrainError::Config(format!("{name} must lie in [0, 1), got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeTrainConfig {
    pub net: VaeNetConfig,
    pub learning_rate: f64,
    pub lr_decay_per_epoch: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    /// Latent frames decoded per utterance per step.
    pub window: usize,
    /// Weight of the spectral and adversarial generator terms.
    pub adv_weight: f64,
    /// Train the discriminator and use its score in the generator loss.
    pub adversarial: bool,
    /// First step at which the discriminator participates.
    pub disc_start: u64,
    pub max_steps: u64,
    pub stft: StftLossConfig,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        Self {
            net: VaeNetConfig::default(),
            learning_rate: 1e-3,
            lr_decay_per_epoch: default_decay(),
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            batch_size: 18,
            window: 32,
            adv_weight: 4.0,
            adversarial: true,
            disc_start: 0,
            max_steps: 430_000,
            stft: StftLossConfig::default(),
        }
    }
}

impl VaeTrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: 0.0,
        }
    }

    pub fn lr_at(&self, epoch: u64) -> f64 {
        lr_at(self.learning_rate, self.lr_decay_per_epoch, epoch)
    }

    /// Whether step `step` trains against the discriminator.
    pub fn adversary_active(&self, step: u64) -> bool {
        self.adversarial && step >= self.disc_start
    }

    /// Samples in the decoded clip.
    pub fn clip_len(&self) -> usize {
        self.window * self.net.hop()
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.net.validate()?;
        check_positive("learning_rate", self.learning_rate)?;
        check_positive("lr_decay_per_epoch", self.lr_decay_per_epoch)?;
        check_positive("eps", self.eps)?;
        check_beta("beta1", self.beta1)?;
        check_beta("beta2", self.beta2)?;
        if self.adv_weight < 0.0 {
            return Err(TrainError::Config(format!("adv_weight must be >= 0, got {}", self.adv_weight)));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if self.window == 0 || self.window > crate::networks::MAX_SLICE_FRAMES {
            return Err(TrainError::Config(format!(
                "window must be 1..={}, got {}",
                crate::networks::MAX_SLICE_FRAMES,
                self.window
            )));
        }
        self.stft.validate()?;
        if self.stft.max_window() > self.clip_len() {
            return Err(TrainError::Config(format!(
                "clip of {} samples is shorter than the {}-sample STFT window",
                self.clip_len(),
                self.stft.max_window()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignTrainConfig {
    pub net: TextNetConfig,
    pub learning_rate: f64,
    pub lr_decay_per_epoch: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub duration_weight: f64,
    /// Regress log-durations instead of frame counts.
    pub log_durations: bool,
    pub max_steps: u64,
}

impl Default for AlignTrainConfig {
    fn default() -> Self {
        Self {
            net: TextNetConfig::default(),
            learning_rate: 2e-4,
            lr_decay_per_epoch: default_decay(),
            beta1: 0.8,
            beta2: 0.98,
            eps: 1e-9,
            weight_decay: 0.01,
            batch_size: 12,
            duration_weight: 1.0,
            log_durations: false,
            max_steps: 820_000,
        }
    }
}

impl AlignTrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn lr_at(&self, epoch: u64) -> f64 {
        lr_at(self.learning_rate, self.lr_decay_per_epoch, epoch)
    }

    /// Frames per token from a raw duration-head output.
    pub fn frames_from_prediction(&self, raw: f64) -> f64 {
        if self.log_durations {
            raw.exp()
        } else {
            raw
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.net.validate()?;
        check_positive("learning_rate", self.learning_rate)?;
        check_positive("lr_decay_per_epoch", self.lr_decay_per_epoch)?;
        check_positive("eps", self.eps)?;
        check_beta("beta1", self.beta1)?;
        check_beta("beta2", self.beta2)?;
        if self.weight_decay < 0.0 || self.duration_weight < 0.0 {
            return Err(TrainError::Config("weight_decay and duration_weight must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}
