use std::path::{Path, PathBuf};

use clap::Args;
use ktts_core::audio::write_wav;
use ktts_core::evalbench::{aggregate_mos, bench_latency, bench_rtf, read_ratings, speedup_percent};
use ktts_core::inference::{SynthesisOptions, Synthesizer};
use ktts_core::phonemizer::{normalize_text, phonemize, PhonemeTable};
use ktts_core::training::{load_checkpoint, TextState, VaeState};

use crate::error::CliError;

fn non_empty(s: &str) -> Result<String, String> {
    if s.trim().is_empty() {
        Err("text must not be empty".into())
    } else {
        Ok(s.to_string())
    }
}

#[derive(Debug, Args)]
pub struct PhonemizeArgs {
    #[arg(long, value_parser = non_empty)]
    text: String,
    /// Grapheme table file; the built-in Sorani table by default.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Print numeric ids instead of symbols.
    #[arg(long)]
    ids: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Text-encoder checkpoint from `train`.
    #[arg(long)]
    ckpt: PathBuf,
    /// VAE checkpoint from `pretrain-vae`.
    #[arg(long)]
    vae: PathBuf,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale on the prior standard deviation; 0 is deterministic.
    #[arg(long, default_value_t = 0.667)]
    temperature: f64,
    /// Multiplier on predicted durations.
    #[arg(long, default_value_t = 1.0)]
    duration_scale: f64,
    /// Latent frames per decoder call.
    #[arg(long, default_value_t = ktts_core::networks::MAX_SLICE_FRAMES)]
    slice: usize,
}

impl SamplingArgs {
    fn options(&self) -> SynthesisOptions {
        SynthesisOptions {
            temperature: self.temperature,
            slice_frames: self.slice,
            seed: self.seed,
            duration_scale: self.duration_scale,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = non_empty)]
    text: String,
    /// Output WAV path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Benchmark sentence; repeatable.
    #[arg(long, value_parser = non_empty)]
    text: Vec<String>,
    /// File with one benchmark sentence per line.
    #[arg(long)]
    texts: Option<PathBuf>,
    /// Timed passes over all sentences, after one warm-up pass.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Mean latency of another system in seconds; prints the relative
    /// time saved.
    #[arg(long)]
    baseline: Option<f64>,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct MosArgs {
    /// CSV with header sample_id,score and integer scores 1..=5.
    #[arg(long)]
    ratings: PathBuf,
}

pub fn phonemize_cmd(a: PhonemizeArgs) -> Result<(), CliError> {
    let table = match &a.table {
        Some(path) => PhonemeTable::load(path).map_err(|e| CliError::from(e).context(path.display()))?,
        None => PhonemeTable::sorani(),
    };
    let seq = phonemize(&normalize_text(&a.text)?, &table)?;
    if a.ids {
        let ids: Vec<String> = seq.ids().iter().map(usize::to_string).collect();
        println!("{}", ids.join(" "));
    } else {
        println!("{}", seq.symbols(&table).join(" "));
    }
    Ok(())
}

struct Models {
    text: TextState,
    vae: VaeState,
}

fn load_models(m: &ModelArgs) -> Result<Models, CliError> {
    let open = |path: &Path| {
        load_checkpoint(path).map_err(|e| CliError::from(e).context(path.display()))
    };
    let text = TextState::from_checkpoint(&open(&m.ckpt)?).map_err(|e| CliError::from(e).context(m.ckpt.display()))?;
    let vae = VaeState::from_checkpoint(&open(&m.vae)?).map_err(|e| CliError::from(e).context(m.vae.display()))?;
    Ok(Models { text, vae })
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let opts = a.sampling.options();
    opts.validate()?;
    let models = load_models(&a.model)?;
    let table = PhonemeTable::sorani();
    let synth = Synthesizer::new(&models.text, &models.vae, &table)?;
    let out = synth.synthesize(&a.text, &opts)?;
    write_wav(&a.out, out.waveform.samples()).map_err(|e| CliError::from(e).context(a.out.display()))?;
    let frames: usize = out.durations.as_slice().iter().sum();
    println!(
        "wrote {} ({} tokens, {} frames, {:.3} s)",
        a.out.display(),
        out.phonemes.len(),
        frames,
        out.waveform.duration_secs()
    );
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let opts = a.sampling.options();
    opts.validate()?;
    if a.repeats < 2 {
        return Err(CliError::Usage("--repeats must be at least 2".into()));
    }
    if let Some(b) = a.baseline {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliError::Usage(format!("--baseline must be positive, got {b}")));
        }
    }
    let mut texts = a.text.clone();
    if let Some(path) = &a.texts {
        let body = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        texts.extend(body.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from));
    }
    if texts.is_empty() {
        return Err(CliError::Usage("give at least one --text or a --texts file".into()));
    }
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();

    let models = load_models(&a.model)?;
    let table = PhonemeTable::sorani();
    let synth = Synthesizer::new(&models.text, &models.vae, &table)?;
    let run = |text: &str| synth.synthesize(text, &opts).map(|s| s.waveform.duration_secs());
    let latency = bench_latency(run, &refs, a.repeats)?;
    let rtf = bench_rtf(run, &refs, a.repeats)?;

    print!("{}", latency.to_text("latency"));
    print!("{}", rtf.to_text("rtf"));
    let speedup = a.baseline.map(|b| speedup_percent(b, latency.mean));
    if let Some(s) = speedup {
        println!("{:<10} {:>10.2} %", "speedup", s);
    }
    println!();
    print!("{}", latency.to_key_values("latency"));
    print!("{}", rtf.to_key_values("rtf"));
    if let Some(s) = speedup {
        println!("speedup_percent={s}");
    }
    Ok(())
}

pub fn mos(a: MosArgs) -> Result<(), CliError> {
    let ratings = read_ratings(&a.ratings)?;
    let report = aggregate_mos(&ratings)?;
    print!("{}", report.to_text());
    println!();
    print!("{}", report.to_key_values());
    Ok(())
}
