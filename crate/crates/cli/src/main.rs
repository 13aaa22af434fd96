use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod corpus;
mod error;
mod synth;
mod train;

/// Sorani Kurdish text-to-speech: corpus tools, training, synthesis and
/// evaluation.
#[derive(Debug, Parser)]
#[command(name = "ktts", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corpus statistics, splitting and a synthetic toy corpus.
    #[command(subcommand)]
    Corpus(corpus::CorpusCommand),
    /// Print the phoneme sequence of a text.
    Phonemize(synth::PhonemizeArgs),
    /// Train the waveform VAE.
    PretrainVae(train::PretrainArgs),
    /// Train the text encoder and duration predictor against a frozen VAE.
    Train(train::AlignArgs),
    /// Synthesize one text to a WAV file.
    Synth(synth::SynthArgs),
    /// Measure latency and real-time factor.
    Bench(synth::BenchArgs),
    /// Aggregate listener ratings into a mean opinion score.
    Mos(synth::MosArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Corpus(c) => corpus::run(c),
        Command::Phonemize(a) => synth::phonemize_cmd(a),
        Command::PretrainVae(a) => train::pretrain(a),
        Command::Train(a) => train::align(a),
        Command::Synth(a) => synth::synth(a),
        Command::Bench(a) => synth::bench(a),
        Command::Mos(a) => synth::mos(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
