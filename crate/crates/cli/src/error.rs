use ktts_core::audio::AudioError;
use ktts_core::corpus::CorpusError;
use ktts_core::evalbench::BenchError;
use ktts_core::inference::InferenceError;
use ktts_core::phonemizer::PhonemizeError;
use ktts_core::training::{CheckpointError, TrainError};

/// Failure of one command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Checkpoint(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Checkpoint(_) => 4,
        }
    }

    /// Prefixes the message with the file or value it concerns.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Checkpoint(m) => CliError::Checkpoint(format!("{what}: {m}")),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PhonemizeError> for CliError {
    fn from(e: PhonemizeError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Checkpoint(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Checkpoint(_) | TrainError::Incompatible(_) => CliError::Checkpoint(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Options(_) => CliError::Usage(e.to_string()),
            InferenceError::Incompatible(_) => CliError::Checkpoint(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
