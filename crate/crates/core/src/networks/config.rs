use serde::{Deserialize, Serialize};

use super::NetworkError;

/// Self-attention stack shared by the text encoder and the wave encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub n_blocks: usize,
    pub n_heads: usize,
    pub model_dim: usize,
    pub ffn_dim: usize,
    /// Filters of the grouped positional convolution.
    pub pos_channels: usize,
    pub pos_kernel: usize,
    pub pos_groups: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            n_blocks: 8,
            n_heads: 8,
            model_dim: 256,
            ffn_dim: 1024,
            pos_channels: 64,
            pos_kernel: 3,
            pos_groups: 16,
        }
    }
}

impl TransformerConfig {
    /// Width 4, one block, two heads; for tests.
    pub fn tiny() -> Self {
        Self {
            n_blocks: 1,
            n_heads: 2,
            model_dim: 4,
            ffn_dim: 8,
            pos_channels: 4,
            pos_kernel: 3,
            pos_groups: 2,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::Config(m));
        if self.model_dim == 0 || self.n_heads == 0 || self.model_dim % self.n_heads != 0 {
            return bad(format!("model_dim {} not divisible by n_heads {}", self.model_dim, self.n_heads));
        }
        if self.pos_groups == 0
            || self.model_dim % self.pos_groups != 0
            || self.pos_channels % self.pos_groups != 0
        {
            return bad(format!(
                "pos_groups {} must divide model_dim {} and pos_channels {}",
                self.pos_groups, self.model_dim, self.pos_channels
            ));
        }
        if self.pos_kernel == 0 || self.ffn_dim == 0 {
            return bad("pos_kernel and ffn_dim must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextEncoderConfig {
    pub vocab_size: usize,
    pub latent_channels: usize,
    pub transformer: TransformerConfig,
}

impl Default for TextEncoderConfig {
    fn default() -> Self {
        Self {
            vocab_size: crate::phonemizer::PhonemeTable::sorani().vocab_size(),
            latent_channels: 256,
            transformer: TransformerConfig::default(),
        }
    }
}

/// Strided convolution front end of the wave encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureEncoderConfig {
    pub kernels: Vec<usize>,
    pub strides: Vec<usize>,
    pub channels: usize,
}

impl Default for FeatureEncoderConfig {
    fn default() -> Self {
        Self {
            kernels: vec![15, 26, 16, 9, 8],
            strides: vec![5, 4, 4, 2, 2],
            channels: 256,
        }
    }
}

impl FeatureEncoderConfig {
    /// Product of strides: input samples per output column.
    pub fn hop(&self) -> usize {
        self.strides.iter().product()
    }

    /// `1 + sum_i (k_i - 1) * prod_{j<i} s_j`.
    pub fn receptive_field(&self) -> usize {
        let mut rf = 1;
        let mut jump = 1;
        for (k, s) in self.kernels.iter().zip(&self.strides) {
            rf += (k - 1) * jump;
            jump *= s;
        }
        rf
    }

    /// Output columns for `len` input samples, composing the unpadded
    /// strided-convolution lengths; `None` below the receptive field.
    pub fn output_len(&self, len: usize) -> Option<usize> {
        let mut n = len;
        for (k, s) in self.kernels.iter().zip(&self.strides) {
            if n < *k {
                return None;
            }
            n = (n - k) / s + 1;
        }
        Some(n)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.kernels.is_empty() || self.kernels.len() != self.strides.len() {
            return Err(NetworkError::Config("kernels and strides must be equally long and non-empty".into()));
        }
        if self.kernels.iter().chain(&self.strides).any(|&v| v == 0) || self.channels == 0 {
            return Err(NetworkError::Config("kernel, stride and channel sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveEncoderConfig {
    pub latent_channels: usize,
    pub feature: FeatureEncoderConfig,
    pub transformer: TransformerConfig,
}

impl Default for WaveEncoderConfig {
    fn default() -> Self {
        Self {
            latent_channels: 256,
            feature: FeatureEncoderConfig::default(),
            transformer: TransformerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveDecoderConfig {
    pub latent_channels: usize,
    /// Transposed-convolution strides in application order; their product
    /// must equal the feature-encoder hop.
    pub upsample_strides: Vec<usize>,
    /// Residual (and upsampler) channels.
    pub channels: usize,
    pub residual_blocks: usize,
    pub kernel: usize,
    pub skip_channels: usize,
    /// Dilations run `1, 2, 4, ...` for this many blocks, then restart.
    pub dilation_cycle: usize,
}

impl Default for WaveDecoderConfig {
    fn default() -> Self {
        Self {
            latent_channels: 256,
            upsample_strides: vec![2, 2, 4, 4, 5],
            channels: 64,
            residual_blocks: 30,
            kernel: 3,
            skip_channels: 64,
            dilation_cycle: 10,
        }
    }
}

impl WaveDecoderConfig {
    pub fn upsample_factor(&self) -> usize {
        self.upsample_strides.iter().product()
    }

    pub fn dilation(&self, block: usize) -> usize {
        1 << (block % self.dilation_cycle.max(1))
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.upsample_strides.is_empty() || self.upsample_strides.contains(&0) {
            return Err(NetworkError::Config("upsample strides must be positive".into()));
        }
        if self.kernel % 2 == 0 {
            return Err(NetworkError::Config(format!("decoder kernel {} must be odd", self.kernel)));
        }
        if self.channels == 0 || self.skip_channels == 0 || self.latent_channels == 0 {
            return Err(NetworkError::Config("decoder channel sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DurationPredictorConfig {
    pub input_dim: usize,
    pub filters: usize,
    pub kernel: usize,
    pub blocks: usize,
}

impl Default for DurationPredictorConfig {
    fn default() -> Self {
        Self {
            input_dim: 256,
            filters: 256,
            kernel: 3,
            blocks: 2,
        }
    }
}

impl DurationPredictorConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.filters != self.input_dim {
            return Err(NetworkError::Config(format!(
                "residual duration blocks need filters ({}) == input_dim ({})",
                self.filters, self.input_dim
            )));
        }
        if self.kernel % 2 == 0 {
            return Err(NetworkError::Config(format!("duration kernel {} must be odd", self.kernel)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    /// Convolution layers including the final one-channel layer.
    pub layers: usize,
    pub channels: usize,
    pub kernel: usize,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            layers: 10,
            channels: 64,
            kernel: 3,
            leaky_slope: 0.2,
        }
    }
}

impl DiscriminatorConfig {
    /// Layer `i` of the hidden stack dilates by `i` (the first by 1); the
    /// output layer is undilated.
    pub fn dilations(&self) -> Vec<usize> {
        let hidden = self.layers.saturating_sub(1);
        (0..hidden).map(|i| i.max(1)).chain(std::iter::once(1)).collect()
    }

    pub fn receptive_field(&self) -> usize {
        1 + (self.kernel - 1) * self.dilations().iter().sum::<usize>()
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.layers < 1 || self.kernel % 2 == 0 || self.channels == 0 {
            return Err(NetworkError::Config("discriminator needs >= 1 layer, odd kernel, channels > 0".into()));
        }
        Ok(())
    }
}

/// Wave encoder, wave decoder and discriminator: everything the VAE phase
/// trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct VaeNetConfig {
    pub wave_encoder: WaveEncoderConfig,
    pub wave_decoder: WaveDecoderConfig,
    pub discriminator: DiscriminatorConfig,
}

impl VaeNetConfig {
    /// Four channels and one block everywhere; for tests.
    pub fn tiny() -> Self {
        Self {
            wave_encoder: WaveEncoderConfig {
                latent_channels: 4,
                feature: FeatureEncoderConfig {
                    channels: 4,
                    ..FeatureEncoderConfig::default()
                },
                transformer: TransformerConfig::tiny(),
            },
            wave_decoder: WaveDecoderConfig {
                latent_channels: 4,
                channels: 4,
                skip_channels: 4,
                residual_blocks: 1,
                dilation_cycle: 1,
                ..WaveDecoderConfig::default()
            },
            discriminator: DiscriminatorConfig {
                layers: 3,
                channels: 4,
                ..DiscriminatorConfig::default()
            },
        }
    }

    pub fn latent_channels(&self) -> usize {
        self.wave_encoder.latent_channels
    }

    /// Samples per latent frame.
    pub fn hop(&self) -> usize {
        self.wave_encoder.feature.hop()
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let enc = &self.wave_encoder;
        enc.feature.validate()?;
        enc.transformer.validate()?;
        self.wave_decoder.validate()?;
        self.discriminator.validate()?;
        if enc.feature.channels != enc.transformer.model_dim {
            return Err(NetworkError::Config(format!(
                "feature channels {} differ from transformer width {}",
                enc.feature.channels, enc.transformer.model_dim
            )));
        }
        if self.wave_decoder.latent_channels != enc.latent_channels {
            return Err(NetworkError::Config(format!(
                "decoder expects {} latent channels, encoder produces {}",
                self.wave_decoder.latent_channels, enc.latent_channels
            )));
        }
        if self.wave_decoder.upsample_factor() != enc.feature.hop() {
            return Err(NetworkError::Config(format!(
                "decoder upsamples by {}, encoder hop is {}",
                self.wave_decoder.upsample_factor(),
                enc.feature.hop()
            )));
        }
        Ok(())
    }
}

/// Text encoder and duration predictor: everything the alignment phase
/// trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TextNetConfig {
    pub text_encoder: TextEncoderConfig,
    pub duration: DurationPredictorConfig,
}

impl TextNetConfig {
    pub fn tiny() -> Self {
        Self {
            text_encoder: TextEncoderConfig {
                latent_channels: 4,
                transformer: TransformerConfig::tiny(),
                ..TextEncoderConfig::default()
            },
            duration: DurationPredictorConfig {
                input_dim: 4,
                filters: 4,
                blocks: 1,
                ..DurationPredictorConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        self.text_encoder.transformer.validate()?;
        self.duration.validate()?;
        if self.text_encoder.vocab_size == 0 {
            return Err(NetworkError::Config("empty vocabulary".into()));
        }
        if self.duration.input_dim != self.text_encoder.transformer.model_dim {
            return Err(NetworkError::Config(format!(
                "duration predictor input {} differs from text width {}",
                self.duration.input_dim, self.text_encoder.transformer.model_dim
            )));
        }
        Ok(())
    }
}
