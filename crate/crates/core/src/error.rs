//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid lattice {rows}x{cols}: {reason}")]
    InvalidLattice {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("pair distance {distance} outside [1, {}] for {n_sites} sites", n_sites - 1)]
    InvalidDistance { distance: usize, n_sites: usize },

    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("dense operators are limited to {limit} sites, got {n_sites}")]
    DenseGuard { n_sites: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("imaginary residue {residue:.3e} exceeds {limit:.1e}; expectation kernel is broken")]
    ImaginaryResidue { residue: f64, limit: f64 },

    #[error("state is not normalized: squared norm {norm_sq} deviates by more than {limit:.1e}")]
    NotNormalized { norm_sq: f64, limit: f64 },

    #[error("split site {split} outside [1, {}] for {n_sites} sites", n_sites - 1)]
    InvalidSplit { split: usize, n_sites: usize },

    #[error("half-system split needs an even site count, got {n_sites}")]
    OddSiteCount { n_sites: usize },

    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("h grid is not uniformly spaced (spacing deviates by more than 1e-9)")]
    NonUniformGrid,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("sample counts differ across h values; per-sample pairing needs a rectangular dataset")]
    RaggedSamples,

    #[error("correlator accumulator is incomplete: {0}")]
    IncompleteAccumulator(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        CoreError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
