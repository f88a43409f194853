use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("unknown corpus format `{0}` (expected jsonl or csv)")]
    UnknownFormat(String),

    #[error("position {position} out of range for document of length {len}")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("invalid split: {0}")]
    Split(String),

    #[error("label {0} has no training instances")]
    MissingLabel(usize),

    #[error("training diverged: non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),

    #[error("{0} requires a logistic-regression model")]
    RequiresLogistic(&'static str),

    #[error("LIME needs at least {needed} samples for this document, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("missing explanation for instance `{0}`")]
    MissingExplanation(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("AUROC undefined: {0}")]
    AurocUndefined(&'static str),

    #[error("metric bound violated for `{id}`: {detail}")]
    BoundViolation { id: String, detail: String },

    #[error(
        "case detector was trained for (model {trained_model}, method {trained_method}), \
         not (model {model}, method {method})"
    )]
    StaleDetector {
        trained_model: String,
        trained_method: String,
        model: String,
        method: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing artifact {0} (run the step that produces it first)")]
    MissingArtifact(PathBuf),

    #[error("step `{step}` failed")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_step(step: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Step {
            step,
            source: Box::new(e),
        }
    }
}
