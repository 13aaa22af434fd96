use std::f64::consts::PI;

use ktts_tensor::{stft_magnitude, Tensor};

use super::{AudioError, Waveform};

/// Periodic Hann window of `len` samples.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Magnitude spectrogram, `bins x frames` with `bins = fft_size / 2 + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Tensor,
    pub fft_size: usize,
    pub hop_size: usize,
    pub win_size: usize,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.magnitudes.rows()
    }

    pub fn frames(&self) -> usize {
        self.magnitudes.cols()
    }
}

pub(crate) fn check_resolution(fft_size: usize, hop_size: usize, win_size: usize) -> Result<(), AudioError> {
    if fft_size == 0 || hop_size == 0 || win_size == 0 {
        return Err(AudioError::BadResolution("sizes must be positive".into()));
    }
    if win_size > fft_size {
        return Err(AudioError::BadResolution(format!("window {win_size} exceeds fft size {fft_size}")));
    }
    if hop_size > win_size {
        return Err(AudioError::BadResolution(format!("hop {hop_size} exceeds window {win_size}")));
    }
    Ok(())
}

/// Hann-windowed STFT magnitudes with no centering: frame `f` starts at
/// sample `f * hop_size`, and frames running past the end are dropped, so
/// `frames = (len - win_size) / hop_size + 1`.
pub fn stft(w: &Waveform, fft_size: usize, hop_size: usize, win_size: usize) -> Result<Spectrogram, AudioError> {
    check_resolution(fft_size, hop_size, win_size)?;
    if w.len() < win_size {
        return Err(AudioError::TooShort { len: w.len(), win: win_size });
    }
    Ok(Spectrogram {
        magnitudes: stft_magnitude(w.samples(), &hann_window(win_size), fft_size, hop_size),
        fft_size,
        hop_size,
        win_size,
    })
}
