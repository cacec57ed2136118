use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed caller input: wrong dimension, empty data, bad flag value.
    #[error("invalid input: {0}")]
    Input(String),

    /// A value lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "minimizer search did not converge after {iterations} iterations (|grad| = {grad_norm:e})"
    )]
    Convergence { iterations: usize, grad_norm: f64 },

    /// The chain left the representable range; usually the step size is too large.
    #[error("chain diverged at step {step}")]
    Divergence { step: usize },

    #[error("replicates diverged: {}", format_failures(.failures))]
    ReplicateDivergence { failures: Vec<(usize, usize)> },

    /// A hypothesis of the ergodicity or sampling bounds cannot be met.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unstable recursion: spectral radius {spectral_radius} >= 1")]
    Instability { spectral_radius: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_failures(failures: &[(usize, usize)]) -> String {
    failures
        .iter()
        .map(|(rep, step)| format!("replicate {rep} at step {step}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: msg.into(),
        }
    }
}
