//! Ensemble runner, file formats and command-line plumbing on top of [`phasespace_core`].

pub mod cli;
pub mod ensemble;
pub mod output;
pub mod series;
pub mod settings;

pub use phasespace_core as core;

pub use ensemble::{compare, detect_tmax, run, undepleted_reference, RunError, RunOptions, RunOutput};
pub use series::TimeSeries;
pub use settings::{ConfigError, Settings};

/// Code version recorded in every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration:\n{0}")]
    Validation(#[from] phasespace_core::ValidationError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Compare(#[from] ensemble::CompareError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status: 2 for bad input, 3 when every trajectory diverged, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) => 2,
            Error::Run(RunError::TimeBeyondFinal { .. } | RunError::BadTime(_)) => 2,
            Error::Run(RunError::TotalDivergence { .. }) => 3,
            Error::Compare(_) | Error::Run(_) | Error::Io(_) => 1,
        }
    }
}
