use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error in `{field}`: {reason}")]
    Domain { field: String, reason: String },

    #[error("simulation diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("rank-deficient design: {0}")]
    Rank(String),

    #[error("numerical degeneracy at step {step}: {detail}")]
    Degenerate { step: usize, detail: String },

    #[error("particle weights degenerated at step {step} (ess = {ess:.3})")]
    WeightDegeneracy { step: usize, ess: f64 },

    #[error("chain diverged at sweep {sweep}: {detail}")]
    ChainDiverged { sweep: usize, detail: String },

    #[error("length mismatch: {0}")]
    Length(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
