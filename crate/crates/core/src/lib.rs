//! Fairness-aware multiobjective evolutionary learning.
//!
//! A population of one-hidden-layer networks is evolved against cross-entropy
//! and 25 group-fairness measures. During the run an online objective
//! reduction picks a representative subset of the 26 objectives from their
//! nonlinear correlation; survival selection only sees that subset.

pub mod data;
pub mod experiment;
pub mod fairness;
pub mod indicators;
pub mod model;
pub mod moea;
pub mod reduction;
pub mod rng;

use thiserror::Error;

/// Top-level error of the experiment layer and the command-line tool.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] experiment::ConfigError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Metrics(#[from] fairness::MetricsError),
    #[error(transparent)]
    Reduction(#[from] reduction::ReductionError),
    #[error(transparent)]
    Moea(#[from] moea::MoeaError),
    #[error(transparent)]
    Indicator(#[from] indicators::IndicatorError),
    #[error(transparent)]
    Stats(#[from] experiment::StatsError),
    #[error("missing artifacts: {0}")]
    MissingArtifacts(String),
    #[error("malformed input {path}: {message}")]
    Input { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for data problems,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Moea(moea::MoeaError::InvalidConfig(_)) => 2,
            Error::Data(_) | Error::Input { .. } | Error::MissingArtifacts(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
