use std::collections::BTreeMap;

use ktts_tensor::{Adam, Bound, Graph, ParameterStore, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use super::vae::{accumulate, average};
use super::{batch_indices, step_rng, AlignTrainConfig, TrainError};
use crate::alignment::{durations_from_alignment, mas, AlignmentPath};
use crate::audio::Waveform;
use crate::latent::{aligned_nll_var, sample_with, token_frame_log_likelihood, DiagGaussianSeq, LatentSeq};
use crate::networks::{self, duration, text_encoder, NetworkError, VaeNetConfig};
use crate::phonemizer::PhonemeSeq;

/// Parameters, optimizer moments and counters of alignment training.
#[derive(Debug, Clone, PartialEq)]
pub struct TextState {
    pub config: AlignTrainConfig,
    pub seed: u64,
    pub step: u64,
    pub params: ParameterStore,
    pub opt: Adam,
}

impl TextState {
    pub fn new(config: AlignTrainConfig, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        let params = networks::init_text(&config.net, seed)?;
        let opt = Adam::new(config.adam(), &params);
        Ok(Self {
            config,
            seed,
            step: 0,
            params,
            opt,
        })
    }

    /// Fails unless the text prior lives in the same latent space as `vae`.
    pub fn check_compatible(&self, vae: &VaeNetConfig) -> Result<(), TrainError> {
        let text = self.config.net.text_encoder.latent_channels;
        if text != vae.latent_channels() {
            return Err(TrainError::Incompatible(format!(
                "text prior has {text} latent channels, the wave encoder {}",
                vae.latent_channels()
            )));
        }
        Ok(())
    }
}

/// Batch means of one alignment step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlignReport {
    pub step: u64,
    pub loss: f64,
    /// Negative log-likelihood of the latent under the aligned prior, per
    /// latent frame.
    pub nll_per_frame: f64,
    pub duration_mse: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Scalar values of the alignment loss terms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlignTerms {
    pub nll_per_frame: f64,
    pub duration_mse: f64,
}

/// `nll / frames + duration_weight * mse(d_pred, d)` for one pair, where the
/// alignment is the best monotonic path of `z` under the current prior and
/// `d` its frame counts. The duration head reads a detached copy of the
/// encoder output, so this term never reaches the encoder.
pub fn alignment_loss_var<'g>(
    p: &Bound<'g>,
    ids: &[usize],
    z: &LatentSeq,
    cfg: &AlignTrainConfig,
) -> Result<(Var<'g>, AlignTerms, AlignmentPath), TrainError> {
    let out = text_encoder::forward(p, ids, &cfg.net.text_encoder);
    let graph = out.mean.graph();
    let prior = DiagGaussianSeq::from_log_std((*out.mean.value()).clone(), &out.log_std.value())?;
    let path = mas(&token_frame_log_likelihood(z, &prior)?)?;
    let durations = durations_from_alignment(&path);

    let nll = aligned_nll_var(z.values(), out.mean, out.log_std, &path).scale(1.0 / z.frames() as f64);
    let targets: Vec<f64> = durations
        .as_slice()
        .iter()
        .map(|&d| if cfg.log_durations { (d as f64).ln() } else { d as f64 })
        .collect();
    let predicted = duration::forward(p, out.hidden, &cfg.net.duration);
    let dur = predicted.mse(graph.constant(Tensor::new(vec![1, ids.len()], targets)));
    let terms = AlignTerms {
        nll_per_frame: nll.value().item(),
        duration_mse: dur.value().item(),
    };
    Ok((nll + dur.scale(cfg.duration_weight), terms, path))
}

/// One alignment step on pairs whose posteriors were already computed by
/// the frozen wave encoder.
///
/// A latent is drawn from each posterior, the best monotonic alignment to
/// the text prior is searched, and the text encoder is trained on the
/// aligned likelihood while the duration head regresses the aligned frame
/// counts. Pairs with fewer frames than tokens are skipped.
pub fn align_step_on_posteriors(
    state: &mut TextState,
    batch: &[(&PhonemeSeq, &DiagGaussianSeq)],
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<AlignReport, TrainError> {
    let cfg = &state.config;
    let mut report = AlignReport {
        step: state.step,
        ..AlignReport::default()
    };
    let mut grads = BTreeMap::new();

    for (phonemes, posterior) in batch {
        let ids = phonemes.ids();
        networks::check_ids(ids, cfg.net.text_encoder.vocab_size)?;
        if posterior.channels() != cfg.net.text_encoder.latent_channels {
            return Err(TrainError::Incompatible(format!(
                "posterior has {} channels, text prior {}",
                posterior.channels(),
                cfg.net.text_encoder.latent_channels
            )));
        }
        let frames = posterior.frames();
        if frames < ids.len() {
            log::warn!("skipping a pair with {frames} latent frames for {} tokens", ids.len());
            report.skipped += 1;
            continue;
        }
        let z = sample_with(posterior, 1.0, rng);

        let graph = Graph::new();
        let p = Bound::new(&graph, &state.params, true);
        let (loss, terms, _) = alignment_loss_var(&p, ids, &z, cfg)?;
        let value = loss.value().item();
        if !value.is_finite() {
            return Err(TrainError::NonFinite(state.step));
        }
        accumulate(&mut grads, p.gradients(&graph.backward(loss)));
        report.loss += value;
        report.nll_per_frame += terms.nll_per_frame;
        report.duration_mse += terms.duration_mse;
        report.used += 1;
    }

    if report.used == 0 {
        return Err(TrainError::NothingToTrain {
            skipped: report.skipped,
        });
    }
    let inv = 1.0 / report.used as f64;
    report.loss *= inv;
    report.nll_per_frame *= inv;
    report.duration_mse *= inv;
    average(&mut grads, report.used);
    state.opt.update(&mut state.params, &grads, lr)?;
    state.step += 1;
    Ok(report)
}

/// One alignment step on raw pairs. The wave encoder reads `vae_params`
/// but never writes them.
pub fn align_step(
    state: &mut TextState,
    vae_params: &ParameterStore,
    vae: &VaeNetConfig,
    batch: &[(&PhonemeSeq, &Waveform)],
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<AlignReport, TrainError> {
    state.check_compatible(vae)?;
    let mut posteriors = Vec::with_capacity(batch.len());
    let mut too_short = 0;
    for (phonemes, w) in batch {
        match networks::wave_encode(vae_params, &vae.wave_encoder, w) {
            Ok(post) => posteriors.push((*phonemes, post)),
            Err(NetworkError::TooShort { len, min }) => {
                log::warn!("skipping a {len}-sample utterance shorter than {min} samples");
                too_short += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let pairs: Vec<(&PhonemeSeq, &DiagGaussianSeq)> = posteriors.iter().map(|(p, g)| (*p, g)).collect();
    let mut report = if pairs.is_empty() {
        return Err(TrainError::NothingToTrain { skipped: too_short });
    } else {
        align_step_on_posteriors(state, &pairs, lr, rng)?
    };
    report.skipped += too_short;
    Ok(report)
}

/// Runs `steps` alignment steps over `data` with the VAE frozen. The
/// posteriors are computed once, since the wave encoder never changes.
pub fn train_alignment(
    state: &mut TextState,
    vae_params: &ParameterStore,
    vae: &VaeNetConfig,
    data: &[(PhonemeSeq, Waveform)],
    steps: u64,
    mut on_step: impl FnMut(&AlignReport),
) -> Result<(), TrainError> {
    state.check_compatible(vae)?;
    let mut usable = Vec::with_capacity(data.len());
    for (phonemes, w) in data {
        match networks::wave_encode(vae_params, &vae.wave_encoder, w) {
            Ok(post) if post.frames() >= phonemes.len() => usable.push((phonemes, post)),
            Ok(post) => log::warn!("dropping a pair: {} frames for {} tokens", post.frames(), phonemes.len()),
            Err(NetworkError::TooShort { len, .. }) => log::warn!("dropping a {len}-sample utterance"),
            Err(e) => return Err(e.into()),
        }
    }
    if usable.is_empty() {
        return Err(TrainError::NothingToTrain { skipped: data.len() });
    }
    for _ in 0..steps {
        let step = state.step;
        let (epoch, idx) = batch_indices(usable.len(), state.config.batch_size, state.seed, step);
        let batch: Vec<(&PhonemeSeq, &DiagGaussianSeq)> = idx.iter().map(|&i| (usable[i].0, &usable[i].1)).collect();
        let lr = state.config.lr_at(epoch);
        let mut rng = step_rng(state.seed, step);
        let report = align_step_on_posteriors(state, &batch, lr, &mut rng)?;
        on_step(&report);
    }
    Ok(())
}
