use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate truncation on dimension '{dim}': no accepted proposals out of {proposals}")]
    DegenerateTruncation { dim: String, proposals: usize },

    #[error("dynamics blow-up at step {step} with params {params:?}")]
    DynamicsBlowUp { params: Vec<f64>, step: usize },

    #[error("rollout batch failed: {failed} of {total} episodes blew up")]
    BatchFailed { failed: usize, total: usize },

    #[error("non-finite loss at batch index {index}")]
    NonFiniteLoss { index: usize },

    #[error("training diverged: every mini-batch in epoch {epoch} produced a non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("standardizer has not been fitted")]
    UnfittedStandardizer,

    #[error("summarizer mismatch: model trained on '{trained}' ({trained_dim} dims), got '{given}' ({given_dim} dims)")]
    SummarizerMismatch {
        trained: String,
        trained_dim: usize,
        given: String,
        given_dim: usize,
    },

    #[error("posterior mass escapes support: {survivors} of {draws} proposals in support, {needed} needed")]
    MassEscapesSupport {
        survivors: usize,
        draws: usize,
        needed: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("stage '{stage}' failed at iteration {iteration}: {source}")]
    Stage {
        stage: &'static str,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
