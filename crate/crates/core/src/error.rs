use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum SadError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("interferer is silent; cannot scale to a target SNR")]
    DegenerateInterferer,
    #[error("loudness is unmeasurable: every block falls below the absolute gate")]
    Unmeasurable,
    #[error("shape mismatch: {0}")]
    InvalidShape(String),
    #[error("weights incompatible with model: {0}")]
    IncompatibleWeights(String),
    #[error("input too short: {frames} frames, model needs at least {required}")]
    InputTooShort { frames: usize, required: usize },
    #[error("corrupt weight file: {0}")]
    CorruptWeights(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDiverged { epoch: usize, detail: String },
    #[error("manifest inconsistent: {0}")]
    ManifestInconsistent(String),
    #[error("degenerate class distribution: {0}")]
    DegenerateClassDistribution(String),
    #[error("unsupported audio format in {path}: {detail}")]
    UnsupportedAudio { path: PathBuf, detail: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
}

pub type Result<T, E = SadError> = std::result::Result<T, E>;
