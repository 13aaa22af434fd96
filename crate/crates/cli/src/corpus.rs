use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use ktts_core::audio::{read_wav, Waveform};
use ktts_core::corpus::{
    corpus_stats, load_manifest, read_manifest, split_corpus, write_manifest, write_toy_corpus, CorpusError,
    SplitSpec, Utterance,
};
use ktts_core::phonemizer::{normalize_text, phonemize, PhonemeSeq, PhonemeTable};

use crate::error::CliError;

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Print duration and category statistics for a manifest.
    Stats(StatsArgs),
    /// Shuffle a manifest into train.csv, val.csv and test.csv.
    Split(SplitArgs),
    /// Write a synthetic tone corpus (manifest.csv and wavs/).
    Toy(ToyArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Manifest CSV with columns id,transcript,category[,duration_s].
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of <id>.wav files; durations are measured from the audio
    /// when given, otherwise read from the duration_s column.
    #[arg(long)]
    wav_dir: Option<PathBuf>,
    /// Histogram bin count.
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Validate every row's audio under this directory before splitting.
    #[arg(long)]
    wav_dir: Option<PathBuf>,
    /// Output directory; defaults to the manifest's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of utterances.
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run(cmd: CorpusCommand) -> Result<(), CliError> {
    match cmd {
        CorpusCommand::Stats(a) => stats(a),
        CorpusCommand::Split(a) => split(a),
        CorpusCommand::Toy(a) => toy(a),
    }
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    if a.bins == 0 {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    let pairs: Vec<(f64, String)> = match &a.wav_dir {
        Some(dir) => load_manifest(&a.manifest, dir)?
            .into_iter()
            .map(|u| (u.duration_s, u.category))
            .collect(),
        None => read_manifest(&a.manifest)?
            .into_iter()
            .map(|r| match r.duration_s {
                Some(d) => Ok((d, r.category)),
                None => Err(CorpusError::NoDuration { id: r.id, line: r.line }),
            })
            .collect::<Result<_, _>>()?,
    };
    let s = corpus_stats(pairs.iter().map(|(d, c)| (*d, c.as_str())), a.bins)?;
    print!("{}", s.to_text());
    println!();
    print!("{}", s.to_key_values());
    Ok(())
}

fn split(a: SplitArgs) -> Result<(), CliError> {
    let rows = read_manifest(&a.manifest)?;
    if let Some(dir) = &a.wav_dir {
        load_manifest(&a.manifest, dir)?;
    }
    let parts = split_corpus(&rows, &SplitSpec::new(a.seed))?;
    let out_dir = match a.out_dir {
        Some(d) => d,
        None => a.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;
    for (name, part) in [("train.csv", &parts.train), ("val.csv", &parts.val), ("test.csv", &parts.test)] {
        let path = out_dir.join(name);
        write_manifest(&path, part)?;
        println!("{}\t{}", path.display(), part.len());
    }
    Ok(())
}

fn toy(a: ToyArgs) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let rows = write_toy_corpus(&a.out_dir, a.count, a.seed)?;
    println!("wrote {} utterances to {}", rows.len(), a.out_dir.display());
    Ok(())
}

/// Validated utterances with their audio.
pub fn load_audio(manifest: &Path, wav_dir: &Path) -> Result<Vec<(Utterance, Waveform)>, CliError> {
    load_manifest(manifest, wav_dir)?
        .into_iter()
        .map(|u| {
            let w = read_wav(&u.audio_path).map_err(|e| CliError::from(e).context(u.audio_path.display()))?;
            Ok((u, w))
        })
        .collect()
}

/// Phonemizes a transcript, naming the utterance on failure.
pub fn phonemes_of(id: &str, transcript: &str, table: &PhonemeTable) -> Result<PhonemeSeq, CliError> {
    normalize_text(transcript)
        .and_then(|t| phonemize(&t, table))
        .map_err(|e| CliError::from(e).context(format!("transcript of `{id}`")))
}
