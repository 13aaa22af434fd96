//! Waveforms, WAV files, short-time Fourier analysis and the multi-resolution
//! STFT loss.

mod loss;
mod stft;
mod wav;

pub use loss::{multi_res_stft_loss, multi_res_stft_loss_var, StftLossConfig, StftResolution, MAGNITUDE_FLOOR};
pub use stft::{hann_window, stft, Spectrogram};
pub use wav::{decode_wav, encode_wav, quantize, read_wav, write_wav};

/// The only sample rate this system reads, writes or generates.
pub const SAMPLE_RATE: u32 = 22_050;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AudioError {
    #[error("not a RIFF file")]
    NotRiff,
    #[error("RIFF file is not WAVE")]
    NotWave,
    #[error("format: expected PCM (1), found {0}")]
    NotPcm(u16),
    #[error("channels: expected 1, found {0}")]
    Channels(u16),
    #[error("sample rate: expected 22050, found {0}")]
    SampleRate(u32),
    #[error("bits per sample: expected 16, found {0}")]
    BitsPerSample(u16),
    #[error("missing `{0}` chunk")]
    MissingChunk(&'static str),
    #[error("truncated chunk")]
    Truncated,
    #[error("waveform has no samples")]
    Empty,
    #[error("sample {index} is {value}, outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("signal of {len} samples is shorter than the {win}-sample window")]
    TooShort { len: usize, win: usize },
    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),
    #[error("invalid STFT resolution: {0}")]
    BadResolution(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Mono audio at [`SAMPLE_RATE`], every sample in `[-1, 1]`, never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.abs() <= 1.0))
        {
            return Err(AudioError::OutOfRange { index, value });
        }
        Ok(Self { samples })
    }

    /// Clamps every sample into `[-1, 1]` instead of rejecting.
    pub fn saturating(samples: Vec<f64>) -> Result<Self, AudioError> {
        Self::new(
            samples
                .into_iter()
                .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }
}
