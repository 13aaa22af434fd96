use std::path::{Path, PathBuf};

use clap::Args;
use ktts_core::phonemizer::PhonemeTable;
use ktts_core::training::{
    load_checkpoint, save_checkpoint, train_alignment, train_vae, Checkpoint, TextState, VaeState,
};

use crate::config::{align_preset, overlay, vae_preset, Preset};
use crate::corpus::{load_audio, phonemes_of};
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Manifest CSV with columns id,transcript,category.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding <id>.wav for every manifest row.
    #[arg(long)]
    wav_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Checkpoint written at the end and every --save-every steps.
    #[arg(long)]
    out: PathBuf,
    /// Continue from this checkpoint; its config and seed are kept and
    /// config flags are ignored.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Built-in config the --config file and flags are applied on top of.
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    preset: Preset,
    /// TOML file of training config keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optimizer steps to run in this invocation.
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// 0 saves only at the end.
    #[arg(long, default_value_t = 0)]
    save_every: u64,
    /// Print a loss line every this many steps; 0 disables.
    #[arg(long, default_value_t = 100)]
    log_every: u64,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Latent frames decoded per utterance and step.
    #[arg(long)]
    window: Option<usize>,
    /// Weight of the spectral and adversarial terms.
    #[arg(long)]
    adv_weight: Option<f64>,
    /// Train without the discriminator.
    #[arg(long)]
    no_adversary: bool,
    /// First step at which the discriminator term applies.
    #[arg(long)]
    disc_start: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Pre-trained VAE checkpoint; it is never modified.
    #[arg(long)]
    vae: PathBuf,
    #[arg(long)]
    duration_weight: Option<f64>,
}

fn load(path: &Path) -> Result<Checkpoint, CliError> {
    load_checkpoint(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn save(c: &Checkpoint, path: &Path) -> Result<(), CliError> {
    save_checkpoint(c, path).map_err(|e| CliError::from(e).context(path.display()))
}

/// Runs `steps` in chunks of `save_every`, saving after each chunk.
fn in_chunks<S>(
    state: &mut S,
    steps: u64,
    save_every: u64,
    mut chunk: impl FnMut(&mut S, u64) -> Result<(), CliError>,
    save: impl Fn(&S) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let size = if save_every == 0 { steps.max(1) } else { save_every };
    let mut done = 0;
    while done < steps {
        let n = size.min(steps - done);
        chunk(state, n)?;
        done += n;
        save(state)?;
    }
    if steps == 0 {
        save(state)?;
    }
    Ok(())
}

pub fn pretrain(a: PretrainArgs) -> Result<(), CliError> {
    let mut state = match &a.run.resume {
        Some(path) => VaeState::from_checkpoint(&load(path)?).map_err(|e| CliError::from(e).context(path.display()))?,
        None => {
            let mut cfg = overlay(&vae_preset(a.run.preset), a.run.config.as_deref())?;
            if let Some(v) = a.run.batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = a.run.learning_rate {
                cfg.learning_rate = v;
            }
            if let Some(v) = a.window {
                cfg.window = v;
            }
            if let Some(v) = a.adv_weight {
                cfg.adv_weight = v;
            }
            if let Some(v) = a.disc_start {
                cfg.disc_start = v;
            }
            if a.no_adversary {
                cfg.adversarial = false;
            }
            VaeState::new(cfg, a.run.seed)?
        }
    };
    let waves: Vec<_> = load_audio(&a.data.manifest, &a.data.wav_dir)?
        .into_iter()
        .map(|(_, w)| w)
        .collect();
    let log_every = a.run.log_every;
    let out = a.run.out.clone();
    in_chunks(
        &mut state,
        a.run.steps,
        a.run.save_every,
        |state, n| {
            train_vae(state, &waves, n, |r| {
                if log_every > 0 && (r.step + 1) % log_every == 0 {
                    println!(
                        "step {} loss {:.5} mse {:.5} kl {:.5} sc {:.4} mag {:.4} adv {:.4} disc {}",
                        r.step + 1,
                        r.generator,
                        r.terms.mse,
                        r.terms.kl,
                        r.terms.spectral_convergence,
                        r.terms.log_magnitude,
                        r.terms.adversarial,
                        r.discriminator.map_or("-".to_string(), |d| format!("{d:.4}")),
                    );
                }
            })?;
            Ok(())
        },
        |state| save(&state.to_checkpoint(), &out),
    )?;
    println!("saved {} at step {}", out.display(), state.step);
    Ok(())
}

pub fn align(a: AlignArgs) -> Result<(), CliError> {
    let vae = VaeState::from_checkpoint(&load(&a.vae)?).map_err(|e| CliError::from(e).context(a.vae.display()))?;
    let mut state = match &a.run.resume {
        Some(path) => TextState::from_checkpoint(&load(path)?).map_err(|e| CliError::from(e).context(path.display()))?,
        None => {
            let mut cfg = overlay(&align_preset(a.run.preset), a.run.config.as_deref())?;
            if let Some(v) = a.run.batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = a.run.learning_rate {
                cfg.learning_rate = v;
            }
            if let Some(v) = a.duration_weight {
                cfg.duration_weight = v;
            }
            TextState::new(cfg, a.run.seed)?
        }
    };
    state.check_compatible(&vae.config.net)?;

    let table = PhonemeTable::sorani();
    let pairs = load_audio(&a.data.manifest, &a.data.wav_dir)?
        .into_iter()
        .map(|(u, w)| Ok((phonemes_of(&u.id, &u.transcript, &table)?, w)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let log_every = a.run.log_every;
    let out = a.run.out.clone();
    in_chunks(
        &mut state,
        a.run.steps,
        a.run.save_every,
        |state, n| {
            train_alignment(state, &vae.params, &vae.config.net, &pairs, n, |r| {
                if log_every > 0 && (r.step + 1) % log_every == 0 {
                    println!(
                        "step {} loss {:.5} nll/frame {:.5} duration_mse {:.5} used {} skipped {}",
                        r.step + 1,
                        r.loss,
                        r.nll_per_frame,
                        r.duration_mse,
                        r.used,
                        r.skipped
                    );
                }
            })?;
            Ok(())
        },
        |state| save(&state.to_checkpoint(), &out),
    )?;
    println!("saved {} at step {}", out.display(), state.step);
    Ok(())
}
