use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("symmetric eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("matrix is not positive semi-definite: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("query {query} outside interpolation range [{min}, {max}]")]
    Extrapolation { query: f64, min: f64, max: f64 },

    #[error("kNN graph is disconnected ({components} components, first sizes {sizes:?}); increase k_neighbors")]
    Disconnected { components: usize, sizes: Vec<usize> },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Parse { .. } | Error::Io { .. })
    }
}
