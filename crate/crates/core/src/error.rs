use std::io;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum HelmError {
    /// Invalid problem or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of a function (e.g. a point outside the PML box).
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller violated an API contract (shape mismatch, bad neighbour, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular matrix: zero pivot at elimination step {step}")]
    Singular { step: usize },

    /// A subdomain solve failed during DDM step `step`.
    #[error("subdomain ({i},{j}) failed at step {step}: {source}")]
    Subdomain {
        i: usize,
        j: usize,
        step: usize,
        #[source]
        source: Box<HelmError>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, HelmError>;
