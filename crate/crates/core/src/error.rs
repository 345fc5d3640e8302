use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the design, simulation and experiment routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on shapes or argument ranges was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The metric matrix of a generalized eigenproblem is numerically singular.
    #[error(
        "metric matrix is numerically singular (min eigenvalue {min_eig:.3e}, max {max_eig:.3e}); increase the ridge"
    )]
    Regularization { min_eig: f64, max_eig: f64 },

    /// Array placement that makes a channel model undefined.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Invalid configuration values or unknown selectors.
    #[error("config error: {0}")]
    Config(String),

    /// A combiner without full column rank was passed to a rate computation.
    #[error("combiner `{name}` is rank deficient (rank {rank} < {cols})")]
    RankDeficient { name: String, rank: usize, cols: usize },

    /// Radar matching denominator fell under the guard for some RF chain.
    #[error("degenerate beam on RF chain {chain}: |denominator| = {magnitude:.3e} <= guard {guard:.3e}")]
    DegenerateBeam { chain: usize, magnitude: f64, guard: f64 },

    /// The steering vector lies inside the subspace that must be nulled.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("failed to parse config {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for errors caused by the user's configuration rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
