//! Differentiable short-time Fourier magnitude.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::graph::Var;
use crate::tensor::Tensor;

struct Framing {
    fft_size: usize,
    hop: usize,
    window: Vec<f64>,
    frames: usize,
}

impl Framing {
    fn new(len: usize, window: &[f64], fft_size: usize, hop: usize) -> Self {
        let win = window.len();
        assert!(win >= 1 && win <= fft_size, "window length {win} vs fft size {fft_size}");
        assert!(hop >= 1, "hop must be positive");
        assert!(len >= win, "signal of {len} samples is shorter than the window ({win})");
        Self {
            fft_size,
            hop,
            window: window.to_vec(),
            frames: (len - win) / hop + 1,
        }
    }

    fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

/// Complex spectra of every frame, `frames x bins`, row-major.
fn spectra(x: &[f64], framing: &Framing, fft: &Arc<dyn Fft<f64>>) -> Vec<Complex<f64>> {
    let bins = framing.bins();
    let mut out = Vec::with_capacity(framing.frames * bins);
    let mut buf = vec![Complex::new(0.0, 0.0); framing.fft_size];
    for f in 0..framing.frames {
        let start = f * framing.hop;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (n, &w) in framing.window.iter().enumerate() {
            buf[n] = Complex::new(w * x[start + n], 0.0);
        }
        fft.process(&mut buf);
        out.extend_from_slice(&buf[..bins]);
    }
    out
}

fn magnitudes(spec: &[Complex<f64>], bins: usize, frames: usize) -> Tensor {
    // stored as bins x frames
    let mut data = vec![0.0; bins * frames];
    for f in 0..frames {
        for k in 0..bins {
            data[k * frames + f] = spec[f * bins + k].norm();
        }
    }
    Tensor::new(vec![bins, frames], data)
}

/// Magnitude spectrogram (`[fft_size/2 + 1, frames]`) of `x` framed without
/// padding: frame `f` covers samples `[f*hop, f*hop + window.len())`, is
/// multiplied by `window` and zero-extended to `fft_size`.
pub fn stft_magnitude(x: &[f64], window: &[f64], fft_size: usize, hop: usize) -> Tensor {
    let framing = Framing::new(x.len(), window, fft_size, hop);
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    let spec = spectra(x, &framing, &fft);
    magnitudes(&spec, framing.bins(), framing.frames)
}

impl<'g> Var<'g> {
    /// [`stft_magnitude`] of a signal stored as any single-row or flat tensor.
    ///
    /// Where a magnitude is exactly zero its derivative is taken as zero.
    pub fn stft_magnitude(self, window: &[f64], fft_size: usize, hop: usize) -> Var<'g> {
        let x = self.value();
        let x_shape = x.shape().to_vec();
        let len = x.numel();
        let framing = Framing::new(len, window, fft_size, hop);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(fft_size);
        let ifft = planner.plan_fft_inverse(fft_size);
        let spec = spectra(x.data(), &framing, &fft);
        let bins = framing.bins();
        let frames = framing.frames;
        let mags = magnitudes(&spec, bins, frames);

        self.graph.push(
            mags,
            &[self],
            Box::new(move |g, _| {
                // d|X_k|/d frame_n = Re(X_k e^{+i 2 pi k n / N}) / |X_k|, so the
                // frame gradient is the real part of an inverse DFT of
                // g_k X_k / |X_k| over the non-negative bins.
                let mut dx = vec![0.0; len];
                let mut buf = vec![Complex::new(0.0, 0.0); framing.fft_size];
                for f in 0..frames {
                    buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
                    for k in 0..bins {
                        let xk = spec[f * bins + k];
                        let norm = xk.norm();
                        if norm > 0.0 {
                            buf[k] = xk * (g.data()[k * frames + f] / norm);
                        }
                    }
                    ifft.process(&mut buf);
                    let start = f * framing.hop;
                    for (n, &w) in framing.window.iter().enumerate() {
                        dx[start + n] += w * buf[n].re;
                    }
                }
                vec![Some(Tensor::new(x_shape.clone(), dx))]
            }),
        )
    }
}
