use std::io;
use std::path::{Path, PathBuf};

use tangle_fluid::{DelayError, FluidError, SimError, StationaryError};
use thiserror::Error;

/// Failure of a subcommand. The variant fixes the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<DelayError> for CliError {
    fn from(e: DelayError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig { .. } => CliError::Config(e.to_string()),
            SimError::EmptyTipSet(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<FluidError> for CliError {
    fn from(e: FluidError) -> Self {
        match e {
            FluidError::InvalidStep(_)
            | FluidError::StepTooLarge { .. }
            | FluidError::InvalidHorizon(_)
            | FluidError::InvalidLambdaRef(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<StationaryError> for CliError {
    fn from(e: StationaryError) -> Self {
        match e {
            StationaryError::Delay(_)
            | StationaryError::InvalidTolerance(_)
            | StationaryError::InvalidLambda(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
