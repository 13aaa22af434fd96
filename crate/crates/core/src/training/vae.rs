use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::ops::Range;

use ktts_tensor::{Adam, Bound, Graph, ParameterStore, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{batch_indices, step_rng, TrainError, VaeTrainConfig};
use crate::audio::{multi_res_stft_loss_var, Waveform};
use crate::latent::{kl_to_standard_normal_var, sample_with, std_from_log_std};
use crate::networks::{self, discriminator, wave_decoder, wave_encoder};

const DISC_PREFIX: &str = "discriminator.";

/// Parameters, optimizer moments and counters of VAE pre-training.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeState {
    pub config: VaeTrainConfig,
    pub seed: u64,
    pub step: u64,
    pub params: ParameterStore,
    pub gen_opt: Adam,
    pub disc_opt: Adam,
}

impl VaeState {
    pub fn new(config: VaeTrainConfig, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        let params = networks::init_vae(&config.net, seed)?;
        let gen_opt = Adam::new(config.adam(), &generator_params(&params));
        let disc_opt = Adam::new(config.adam(), &params.subset(DISC_PREFIX));
        Ok(Self {
            config,
            seed,
            step: 0,
            params,
            gen_opt,
            disc_opt,
        })
    }
}

/// Encoder and decoder parameters: everything but the discriminator.
pub(crate) fn generator_params(store: &ParameterStore) -> ParameterStore {
    let mut out = ParameterStore::new();
    for (name, t) in store.iter().filter(|(n, _)| !n.starts_with(DISC_PREFIX)) {
        out.insert(name, t.clone()).expect("names are unique in the source store");
    }
    out
}

/// Binds names accepted by `trainable` as parameters, the rest as constants.
pub(crate) fn bind_where<'g>(
    graph: &'g Graph,
    store: &ParameterStore,
    trainable: impl Fn(&str) -> bool,
) -> Bound<'g> {
    let vars = store
        .iter()
        .map(|(name, t)| {
            let v = if trainable(name) {
                graph.param(t.clone())
            } else {
                graph.constant(t.clone())
            };
            (name.to_string(), v)
        })
        .collect();
    Bound::from_vars(vars)
}

pub(crate) fn accumulate(into: &mut BTreeMap<String, Tensor>, grads: BTreeMap<String, Tensor>) {
    for (name, g) in grads {
        match into.get_mut(&name) {
            Some(acc) => acc.add_assign(&g),
            None => {
                into.insert(name, g);
            }
        }
    }
}

pub(crate) fn average(grads: &mut BTreeMap<String, Tensor>, n: usize) {
    let inv = 1.0 / n as f64;
    for g in grads.values_mut() {
        for v in g.data_mut() {
            *v *= inv;
        }
    }
}

/// Sample range of the waveform that latent frames `start..start + window`
/// decode to: frame `j` starts at sample `hop * j`.
pub fn clip_range(start: usize, window: usize, hop: usize) -> Range<usize> {
    hop * start..hop * (start + window)
}

/// Scalar values of the generator loss terms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GeneratorTerms {
    pub mse: f64,
    pub kl: f64,
    pub spectral_convergence: f64,
    pub log_magnitude: f64,
    pub adversarial: f64,
}

/// `mse + kl + adv_weight * (sc + mag + mean((D(x_hat) - 1)^2))`; the last
/// term only when `disc_scores` is given.
///
/// Both halves of the evidence bound are per waveform sample: `mse` is a
/// mean over clip samples and `kl` is the posterior's total divergence over
/// all channels and frames divided by `source_len`, the utterance length.
pub fn generator_loss_var<'g>(
    x_hat: Var<'g>,
    clip: &[f64],
    mean: Var<'g>,
    log_std: Var<'g>,
    source_len: usize,
    disc_scores: Option<Var<'g>>,
    cfg: &VaeTrainConfig,
) -> Result<(Var<'g>, GeneratorTerms), TrainError> {
    let graph = x_hat.graph();
    let target = graph.constant(Tensor::new(vec![1, clip.len()], clip.to_vec()));
    let mse = x_hat.mse(target);
    let kl = kl_to_standard_normal_var(mean, log_std).scale(1.0 / source_len as f64);
    let (sc, mag) = multi_res_stft_loss_var(x_hat, clip, &cfg.stft)?;
    let mut adversarial = sc + mag;
    let mut adv_value = 0.0;
    if let Some(scores) = disc_scores {
        let adv = scores.add_scalar(-1.0).square().mean();
        adv_value = adv.value().item();
        adversarial = adversarial + adv;
    }
    let total = mse + kl + adversarial.scale(cfg.adv_weight);
    let terms = GeneratorTerms {
        mse: mse.value().item(),
        kl: kl.value().item(),
        spectral_convergence: sc.value().item(),
        log_magnitude: mag.value().item(),
        adversarial: adv_value,
    };
    Ok((total, terms))
}

/// Batch means of one VAE step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VaeReport {
    pub step: u64,
    pub generator: f64,
    pub terms: GeneratorTerms,
    /// Present from the discriminator start step on.
    pub discriminator: Option<f64>,
    pub used: usize,
    pub skipped: usize,
}

fn lsgan_discriminator_loss<'g>(real: Var<'g>, fake: Var<'g>) -> Var<'g> {
    real.add_scalar(-1.0).square().mean() + fake.square().mean()
}

/// One optimizer step of VAE pre-training on `batch` at learning rate `lr`.
///
/// Each utterance is encoded, a latent is sampled at temperature one, and a
/// uniformly placed window of frames is decoded and compared with the
/// matching clip. Utterances with fewer latent frames than the window are
/// skipped with a warning.
pub fn vae_step<W: Borrow<Waveform>>(
    state: &mut VaeState,
    batch: &[W],
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<VaeReport, TrainError> {
    let cfg = &state.config;
    let net = &cfg.net;
    let window = cfg.window;
    let adversary = cfg.adversary_active(state.step);
    let mut report = VaeReport {
        step: state.step,
        discriminator: adversary.then_some(0.0),
        ..VaeReport::default()
    };
    let mut gen_grads = BTreeMap::new();
    let mut disc_grads = BTreeMap::new();

    for w in batch {
        let samples = w.borrow().samples();
        let frames = net.wave_encoder.feature.output_len(samples.len()).unwrap_or(0);
        if frames < window {
            log::warn!(
                "skipping a {}-sample utterance: {frames} latent frames, window {window}",
                samples.len()
            );
            report.skipped += 1;
            continue;
        }

        let graph = Graph::new();
        let p = bind_where(&graph, &state.params, |n| !n.starts_with(DISC_PREFIX));
        let x = graph.constant(Tensor::new(vec![1, samples.len()], samples.to_vec()));
        let (mean, log_std) = wave_encoder::forward(&p, x, &net.wave_encoder);
        let noise = Tensor::from_fn(&mean.shape(), |_| StandardNormal.sample(rng));
        let z = mean + std_from_log_std(log_std) * graph.constant(noise);
        let start = rng.random_range(0..=frames - window);
        let x_hat = wave_decoder::forward(&p, z.slice_cols(start, start + window), &net.wave_decoder);
        let clip = &samples[clip_range(start, window, net.hop())];
        let scores = adversary.then(|| discriminator::forward(&p, x_hat, &net.discriminator));
        let (loss, terms) = generator_loss_var(x_hat, clip, mean, log_std, samples.len(), scores, cfg)?;
        let loss_value = loss.value().item();
        if !loss_value.is_finite() {
            return Err(TrainError::NonFinite(state.step));
        }
        let grads = p.gradients(&graph.backward(loss));
        accumulate(
            &mut gen_grads,
            grads.into_iter().filter(|(n, _)| !n.starts_with(DISC_PREFIX)).collect(),
        );
        report.generator += loss_value;
        report.terms.mse += terms.mse;
        report.terms.kl += terms.kl;
        report.terms.spectral_convergence += terms.spectral_convergence;
        report.terms.log_magnitude += terms.log_magnitude;
        report.terms.adversarial += terms.adversarial;

        if adversary {
            let fake = (*x_hat.value()).clone();
            let dgraph = Graph::new();
            let dp = Bound::new(&dgraph, &state.params.subset(DISC_PREFIX), true);
            let real = discriminator::forward(&dp, networks::waveform_var(&dgraph, clip), &net.discriminator);
            let fake = discriminator::forward(&dp, dgraph.constant(fake), &net.discriminator);
            let dloss = lsgan_discriminator_loss(real, fake);
            let dvalue = dloss.value().item();
            if !dvalue.is_finite() {
                return Err(TrainError::NonFinite(state.step));
            }
            *report.discriminator.as_mut().expect("set when adversarial") += dvalue;
            accumulate(&mut disc_grads, dp.gradients(&dgraph.backward(dloss)));
        }
        report.used += 1;
    }

    if report.used == 0 {
        return Err(TrainError::NothingToTrain {
            skipped: report.skipped,
        });
    }
    let n = report.used;
    let inv = 1.0 / n as f64;
    report.generator *= inv;
    report.terms.mse *= inv;
    report.terms.kl *= inv;
    report.terms.spectral_convergence *= inv;
    report.terms.log_magnitude *= inv;
    report.terms.adversarial *= inv;
    if let Some(d) = report.discriminator.as_mut() {
        *d *= inv;
    }

    average(&mut gen_grads, n);
    state.gen_opt.update(&mut state.params, &gen_grads, lr)?;
    if adversary {
        average(&mut disc_grads, n);
        state.disc_opt.update(&mut state.params, &disc_grads, lr)?;
    }
    state.step += 1;
    Ok(report)
}

/// Runs `steps` VAE steps over `data`, batching by seeded per-epoch
/// shuffles and scheduling the learning rate by epoch. Utterances too short
/// for one window are dropped up front.
pub fn train_vae(
    state: &mut VaeState,
    data: &[Waveform],
    steps: u64,
    mut on_step: impl FnMut(&VaeReport),
) -> Result<(), TrainError> {
    let window = state.config.window;
    let feature = state.config.net.wave_encoder.feature.clone();
    let usable: Vec<&Waveform> = data
        .iter()
        .filter(|w| feature.output_len(w.len()).unwrap_or(0) >= window)
        .collect();
    if usable.len() < data.len() {
        log::warn!("{} of {} utterances are too short to train on", data.len() - usable.len(), data.len());
    }
    if usable.is_empty() {
        return Err(TrainError::NothingToTrain { skipped: data.len() });
    }
    for _ in 0..steps {
        let step = state.step;
        let (epoch, idx) = batch_indices(usable.len(), state.config.batch_size, state.seed, step);
        let batch: Vec<&Waveform> = idx.iter().map(|&i| usable[i]).collect();
        let lr = state.config.lr_at(epoch);
        let mut rng = step_rng(state.seed, step);
        let report = vae_step(state, &batch, lr, &mut rng)?;
        on_step(&report);
    }
    Ok(())
}

/// Mean squared error between decoded and true clips over every
/// non-overlapping window of every long-enough utterance, with latents drawn
/// at temperature 1 from a generator seeded by `seed`.
pub fn clip_mse(state: &VaeState, data: &[Waveform], seed: u64) -> Result<f64, TrainError> {
    let net = &state.config.net;
    let window = state.config.window;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut total, mut count) = (0.0, 0usize);
    for w in data {
        let frames = net.wave_encoder.feature.output_len(w.len()).unwrap_or(0);
        if frames < window {
            continue;
        }
        let posterior = networks::wave_encode(&state.params, &net.wave_encoder, w)?;
        let z = sample_with(&posterior, 1.0, &mut rng);
        for start in (0..=frames - window).step_by(window) {
            let slice = z.slice(start, start + window).map_err(TrainError::Latent)?;
            let decoded = networks::wave_decode(&state.params, &net.wave_decoder, &slice)?;
            let clip = &w.samples()[clip_range(start, window, net.hop())];
            total += decoded
                .samples()
                .iter()
                .zip(clip)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
            count += clip.len();
        }
    }
    if count == 0 {
        return Err(TrainError::NothingToTrain { skipped: data.len() });
    }
    Ok(total / count as f64)
}
