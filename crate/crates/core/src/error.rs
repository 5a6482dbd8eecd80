use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the sampling library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid constraint set: {0}")]
    InvalidSet(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "projection solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    ProjectionNonConvergence { iterations: usize, residual: f64 },

    #[error("constant unavailable: {0}")]
    ConstantUnavailable(String),

    #[error("chain diverged at step {step} (|theta| = {theta_norm:e}, |v| = {v_norm:e})")]
    Diverged {
        step: usize,
        theta_norm: f64,
        v_norm: f64,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("sample sets have unequal sizes ({0} vs {1})")]
    UnequalSampleSizes(usize, usize),

    #[error("exact assignment is capped at {cap} points (got {n}); subsample both sets first")]
    TooManySamples { n: usize, cap: usize },

    #[error("rejection sampler acceptance rate {rate:e} is below {floor:e}")]
    AcceptanceTooLow { rate: f64, floor: f64 },

    #[error("inadmissible: {0}")]
    Inadmissible(String),

    #[error("order fit needs at least {needed} usable points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidSet(_) => "invalid_set",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::ProjectionNonConvergence { .. } => "projection_non_convergence",
            Error::ConstantUnavailable(_) => "constant_unavailable",
            Error::Diverged { .. } => "diverged",
            Error::EmptyDataset => "empty_dataset",
            Error::UnequalSampleSizes(..) => "unequal_sample_sizes",
            Error::TooManySamples { .. } => "too_many_samples",
            Error::AcceptanceTooLow { .. } => "acceptance_too_low",
            Error::Inadmissible(_) => "inadmissible",
            Error::NotEnoughPoints { .. } => "not_enough_points",
            Error::Unsupported(_) => "unsupported",
            Error::Unknown { .. } => "unknown",
            Error::Seed { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Config(_) => "config",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
