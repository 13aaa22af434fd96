//! Diagonal-Gaussian latent sequences: temperature sampling, log-densities,
//! KL to the standard normal, and the alignment-conditioned likelihood.
//!
//! Sequences are `[channels, frames]` matrices, one Gaussian per column.

use ktts_tensor::{Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::alignment::AlignmentPath;

/// Lower bound on every standard deviation.
pub const STD_FLOOR: f64 = 1e-4;
/// Range that encoder log-std outputs are clamped to before `exp`.
pub const LOG_STD_RANGE: (f64, f64) = (-9.0, 4.0);

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatentError {
    #[error("shape mismatch: {what} is {got:?}, expected {expected:?}")]
    Shape {
        what: &'static str,
        got: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("a latent sequence needs at least one frame and one channel")]
    Empty,
    #[error("temperature must be >= 0, got {0}")]
    Temperature(f64),
    #[error("non-finite latent value")]
    NonFinite,
    #[error("frame {frame} is aligned to token {token}, but there are only {tokens} tokens")]
    TokenOutOfRange {
        frame: usize,
        token: usize,
        tokens: usize,
    },
}

fn check_matrix(what: &'static str, t: &Tensor, expected: Option<&[usize]>) -> Result<(), LatentError> {
    if t.rank() != 2 || t.numel() == 0 {
        return Err(LatentError::Empty);
    }
    if let Some(expected) = expected {
        if t.shape() != expected {
            return Err(LatentError::Shape {
                what,
                got: t.shape().to_vec(),
                expected: expected.to_vec(),
            });
        }
    }
    Ok(())
}

/// Per-frame diagonal Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussianSeq {
    mean: Tensor,
    std: Tensor,
}

impl DiagGaussianSeq {
    /// Standard deviations below [`STD_FLOOR`] are raised to it.
    pub fn new(mean: Tensor, std: Tensor) -> Result<Self, LatentError> {
        check_matrix("mean", &mean, None)?;
        check_matrix("std", &std, Some(mean.shape()))?;
        if !mean.is_finite() || !std.is_finite() {
            return Err(LatentError::NonFinite);
        }
        Ok(Self {
            mean,
            std: std.map(|s| s.max(STD_FLOOR)),
        })
    }

    /// Builds from encoder outputs: `std = exp(clamp(log_std, -9, 4))`.
    pub fn from_log_std(mean: Tensor, log_std: &Tensor) -> Result<Self, LatentError> {
        let (lo, hi) = LOG_STD_RANGE;
        Self::new(mean, log_std.map(|l| l.clamp(lo, hi).exp()))
    }

    pub fn mean(&self) -> &Tensor {
        &self.mean
    }

    pub fn std(&self) -> &Tensor {
        &self.std
    }

    pub fn channels(&self) -> usize {
        self.mean.rows()
    }

    pub fn frames(&self) -> usize {
        self.mean.cols()
    }
}

/// A sampled latent sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSeq {
    z: Tensor,
}

impl LatentSeq {
    pub fn new(z: Tensor) -> Result<Self, LatentError> {
        check_matrix("z", &z, None)?;
        if !z.is_finite() {
            return Err(LatentError::NonFinite);
        }
        Ok(Self { z })
    }

    pub fn values(&self) -> &Tensor {
        &self.z
    }

    pub fn into_tensor(self) -> Tensor {
        self.z
    }

    pub fn channels(&self) -> usize {
        self.z.rows()
    }

    pub fn frames(&self) -> usize {
        self.z.cols()
    }

    /// Frames `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<LatentSeq, LatentError> {
        let (c, t) = (self.channels(), self.frames());
        if start >= end || end > t {
            return Err(LatentError::Empty);
        }
        LatentSeq::new(Tensor::from_fn2(c, end - start, |r, k| self.z.at2(r, start + k)))
    }
}

/// `z = mean + temperature * std * eps`, `eps ~ N(0, I)` drawn from `seed`.
pub fn sample(g: &DiagGaussianSeq, temperature: f64, seed: u64) -> Result<LatentSeq, LatentError> {
    if !(temperature >= 0.0) {
        return Err(LatentError::Temperature(temperature));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_with(g, temperature, &mut rng))
}

/// [`sample`] drawing noise from a caller-owned generator.
pub fn sample_with(g: &DiagGaussianSeq, temperature: f64, rng: &mut ChaCha8Rng) -> LatentSeq {
    let data = g
        .mean
        .data()
        .iter()
        .zip(g.std.data())
        .map(|(&m, &s)| {
            let eps: f64 = StandardNormal.sample(rng);
            m + temperature * s * eps
        })
        .collect();
    LatentSeq {
        z: Tensor::new(g.mean.shape().to_vec(), data),
    }
}

fn log_normal(z: f64, mean: f64, std: f64) -> f64 {
    let d = (z - mean) / std;
    -HALF_LOG_2PI - std.ln() - 0.5 * d * d
}

/// Log-density of each frame of `z` under the matching frame of `g`.
pub fn log_prob(z: &LatentSeq, g: &DiagGaussianSeq) -> Result<Vec<f64>, LatentError> {
    check_matrix("z", &z.z, Some(g.mean.shape()))?;
    let (c, t) = (g.channels(), g.frames());
    Ok((0..t)
        .map(|j| {
            (0..c)
                .map(|r| log_normal(z.z.at2(r, j), g.mean.at2(r, j), g.std.at2(r, j)))
                .sum()
        })
        .collect())
}

/// Closed-form KL from `g` to `N(0, I)`, summed over channels and frames.
pub fn kl_to_standard_normal(g: &DiagGaussianSeq) -> f64 {
    g.mean
        .data()
        .iter()
        .zip(g.std.data())
        .map(|(&m, &s)| 0.5 * (s * s + m * m - 1.0 - 2.0 * s.ln()))
        .sum()
}

/// Matrix of `log N(z_j; mean_i, std_i)` summed over channels, shaped
/// `[tokens, frames]`: the score table for monotonic alignment search.
pub fn token_frame_log_likelihood(z: &LatentSeq, prior: &DiagGaussianSeq) -> Result<Tensor, LatentError> {
    let c = prior.channels();
    if z.channels() != c {
        return Err(LatentError::Shape {
            what: "z",
            got: z.z.shape().to_vec(),
            expected: vec![c, z.frames()],
        });
    }
    let (tokens, frames) = (prior.frames(), z.frames());
    // Expand the square: sum_c [-log s - (z^2 - 2 z m + m^2) / 2s^2] - c/2 log 2pi.
    let mut out = Tensor::zeros(&[tokens, frames]);
    for i in 0..tokens {
        let mut constant = -(c as f64) * HALF_LOG_2PI;
        let mut inv_var = Vec::with_capacity(c);
        for r in 0..c {
            let (m, s) = (prior.mean.at2(r, i), prior.std.at2(r, i));
            constant -= s.ln() + 0.5 * m * m / (s * s);
            inv_var.push(1.0 / (s * s));
        }
        for j in 0..frames {
            let mut acc = constant;
            for (r, &iv) in inv_var.iter().enumerate() {
                let zv = z.z.at2(r, j);
                acc += iv * (zv * prior.mean.at2(r, i) - 0.5 * zv * zv);
            }
            out.set2(i, j, acc);
        }
    }
    Ok(out)
}

/// `sum_j log N(z_j; mean_{A(j)}, std_{A(j)})`.
pub fn aligned_log_likelihood(
    z: &LatentSeq,
    text_prior: &DiagGaussianSeq,
    path: &AlignmentPath,
) -> Result<f64, LatentError> {
    let c = text_prior.channels();
    let tokens = text_prior.frames();
    let frames = path.len();
    check_matrix("z", &z.z, Some(&[c, frames]))?;
    let mut total = 0.0;
    for (j, &i) in path.token_of_frame().iter().enumerate() {
        if i >= tokens {
            return Err(LatentError::TokenOutOfRange { frame: j, token: i, tokens });
        }
        for r in 0..c {
            total += log_normal(z.z.at2(r, j), text_prior.mean.at2(r, i), text_prior.std.at2(r, i));
        }
    }
    Ok(total)
}

/// Differentiable `std = exp(clamp(log_std, -9, 4))`.
pub fn std_from_log_std<'g>(log_std: Var<'g>) -> Var<'g> {
    let (lo, hi) = LOG_STD_RANGE;
    log_std.clamp(lo, hi).exp()
}

/// Differentiable [`kl_to_standard_normal`] from mean and log-std outputs.
/// Uses the clamped log-std directly so the log term matches the std used.
pub fn kl_to_standard_normal_var<'g>(mean: Var<'g>, log_std: Var<'g>) -> Var<'g> {
    let (lo, hi) = LOG_STD_RANGE;
    let log_std = log_std.clamp(lo, hi);
    let var = log_std.scale(2.0).exp();
    (var + mean.square() - log_std.scale(2.0))
        .add_scalar(-1.0)
        .sum()
        .scale(0.5)
}

/// Differentiable `-aligned_log_likelihood` for a constant `z`, with the
/// token statistics given as graph variables of shape `[channels, tokens]`.
pub fn aligned_nll_var<'g>(z: &Tensor, mean: Var<'g>, log_std: Var<'g>, path: &AlignmentPath) -> Var<'g> {
    let (lo, hi) = LOG_STD_RANGE;
    let graph = mean.graph();
    let idx = path.token_of_frame();
    let mean_x = mean.gather_cols(idx);
    let log_std_x = log_std.clamp(lo, hi).gather_cols(idx);
    let z = graph.constant(z.clone());
    let scaled = (z - mean_x).mul(log_std_x.neg().exp());
    let per_elem = log_std_x + scaled.square().scale(0.5);
    per_elem.sum().add_scalar(HALF_LOG_2PI * z.value().numel() as f64)
}
