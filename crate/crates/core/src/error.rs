use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A wavelength that does not fall on the simulation grid.
    #[error("wavelength {0} nm is not on the 380-780 nm / 10 nm grid")]
    OffGrid(f64),

    #[error("spectral data error: {0}")]
    Data(String),

    /// An argument outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: unsupported {kind} version {found} (this build reads up to {supported})")]
    Version {
        path: PathBuf,
        kind: &'static str,
        found: u32,
        supported: u32,
    },

    #[error("{path}: payload hash mismatch (stored {stored:016x}, computed {computed:016x})")]
    HashMismatch {
        path: PathBuf,
        stored: u64,
        computed: u64,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("image error: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_) | Error::OffGrid(_))
    }
}
