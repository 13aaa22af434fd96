//! Paired text/audio corpus: manifest loading, seeded splits, statistics and
//! a synthetic toy corpus for smoke tests.

mod manifest;
mod split;
mod stats;
mod toy;

use crate::audio::AudioError;
pub use manifest::{load_manifest, read_manifest, write_manifest, ManifestRow, Utterance};
pub use split::{split_corpus, split_counts, Split, SplitSpec};
pub use stats::{corpus_stats, CorpusStats, HistogramBin};
pub use toy::{toy_corpus, write_toy_corpus, ToyUtterance};

/// Topic labels of the reference Central Kurdish corpus. Other labels are
/// accepted with a warning.
pub const DEFAULT_CATEGORIES: [&str; 12] = [
    "News",
    "Sport",
    "Health",
    "Interview",
    "Science",
    "Religion",
    "Economic",
    "General information",
    "Politics",
    "Education and literature",
    "Article",
    "Social",
];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: malformed CSV at line {line}: {message}")]
    Csv { path: String, line: u64, message: String },
    #[error("{path}: header must contain id, transcript and category, found {found:?}")]
    Header { path: String, found: Vec<String> },
    #[error("line {line}: empty {column}")]
    EmptyField { line: u64, column: &'static str },
    #[error("line {line}: duplicate id `{id}` (first seen on line {first})")]
    DuplicateId { id: String, line: u64, first: u64 },
    #[error("line {line}: invalid duration {value} for `{id}`")]
    BadDuration { id: String, line: u64, value: f64 },
    #[error("line {line}: audio for `{id}` not found at {path}")]
    MissingAudio { id: String, line: u64, path: String },
    #[error("line {line}: audio for `{id}` at {path} is invalid: {source}")]
    InvalidAudio {
        id: String,
        line: u64,
        path: String,
        source: AudioError,
    },
    #[error("line {line}: `{id}` has no duration_s column and no audio was given")]
    NoDuration { id: String, line: u64 },
    #[error("a split needs at least 3 utterances, got {0}")]
    TooFew(usize),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("empty corpus")]
    Empty,
}
