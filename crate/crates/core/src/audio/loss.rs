use ktts_tensor::{Graph, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::stft::{check_resolution, hann_window};
use super::{AudioError, Waveform};

/// Magnitudes are floored here before any log or division.
pub const MAGNITUDE_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftResolution {
    pub fft_size: usize,
    pub hop_size: usize,
    pub win_size: usize,
}

impl StftResolution {
    pub const fn new(fft_size: usize, hop_size: usize, win_size: usize) -> Self {
        Self {
            fft_size,
            hop_size,
            win_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftLossConfig {
    pub resolutions: Vec<StftResolution>,
}

impl Default for StftLossConfig {
    /// The three Parallel WaveGAN resolutions.
    fn default() -> Self {
        Self {
            resolutions: vec![
                StftResolution::new(1024, 120, 600),
                StftResolution::new(2048, 240, 1200),
                StftResolution::new(512, 50, 240),
            ],
        }
    }
}

impl StftLossConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        if self.resolutions.is_empty() {
            return Err(AudioError::BadResolution("no resolutions".into()));
        }
        for r in &self.resolutions {
            check_resolution(r.fft_size, r.hop_size, r.win_size)?;
        }
        Ok(())
    }

    pub fn max_window(&self) -> usize {
        self.resolutions.iter().map(|r| r.win_size).max().unwrap_or(0)
    }
}

/// Spectral-convergence and log-magnitude losses of `x_hat` against the
/// constant reference `x`, averaged over resolutions, on the graph of
/// `x_hat`.
pub fn multi_res_stft_loss_var<'g>(
    x_hat: Var<'g>,
    x: &[f64],
    cfg: &StftLossConfig,
) -> Result<(Var<'g>, Var<'g>), AudioError> {
    cfg.validate()?;
    let len = x_hat.value().numel();
    if len != x.len() {
        return Err(AudioError::LengthMismatch(len, x.len()));
    }
    if len < cfg.max_window() {
        return Err(AudioError::TooShort {
            len,
            win: cfg.max_window(),
        });
    }
    let graph = x_hat.graph();
    let reference = graph.constant(Tensor::new(vec![1, len], x.to_vec()));
    let x_hat = x_hat.reshape(&[1, len]);

    let mut sc_terms = Vec::with_capacity(cfg.resolutions.len());
    let mut mag_terms = Vec::with_capacity(cfg.resolutions.len());
    for r in &cfg.resolutions {
        let window = hann_window(r.win_size);
        let target = reference
            .stft_magnitude(&window, r.fft_size, r.hop_size)
            .floor_at(MAGNITUDE_FLOOR);
        let estimate = x_hat
            .stft_magnitude(&window, r.fft_size, r.hop_size)
            .floor_at(MAGNITUDE_FLOOR);
        let sc = (target - estimate).square().sum().sqrt().div(target.square().sum().sqrt());
        let mag = (target.log() - estimate.log()).abs().mean();
        sc_terms.push(sc);
        mag_terms.push(mag);
    }
    let n = cfg.resolutions.len() as f64;
    let sum = |terms: Vec<Var<'g>>| terms.into_iter().reduce(|a, b| a + b).expect("non-empty");
    Ok((sum(sc_terms).scale(1.0 / n), sum(mag_terms).scale(1.0 / n)))
}

/// `(L_sc, L_mag)` of `x_hat` against `x`.
pub fn multi_res_stft_loss(
    x_hat: &Waveform,
    x: &Waveform,
    cfg: &StftLossConfig,
) -> Result<(f64, f64), AudioError> {
    let graph = Graph::new();
    let est = graph.constant(Tensor::new(vec![1, x_hat.len()], x_hat.samples().to_vec()));
    let (sc, mag) = multi_res_stft_loss_var(est, x.samples(), cfg)?;
    let (sc, mag) = (sc.value().item(), mag.value().item());
    Ok((sc, mag))
}
