use std::io;
use std::path::PathBuf;

use oneshot::bounds::BoundError;
use oneshot::codecsim::SimError;
use oneshot::densities::DensityError;
use oneshot::pmf::PmfError;
use oneshot::scenario::ScenarioError;
use oneshot::second_order::SecondOrderError;
use thiserror::Error;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write output: {0}")]
    Write(#[from] io::Error),
    #[error("{}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("mode `{mode}` is not available for scenario `{scenario}`: {reason}")]
    ModeUnsupported {
        mode: &'static str,
        scenario: &'static str,
        reason: &'static str,
    },
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    SecondOrder(#[from] SecondOrderError),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    /// Error category printed ahead of the message.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Read { .. } | CliError::Write(_) => "IO_ERROR",
            CliError::Parse { .. } => "PARSE_ERROR",
            CliError::ModeUnsupported { .. } => "MODE_UNSUPPORTED",
            _ if self.exit_code() == EXIT_NUMERIC => "NUMERIC_ERROR",
            _ => "VALIDATION_ERROR",
        }
    }

    /// Process exit code: 2 for bad input, 3 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Bound(BoundError::Density(d))
            | CliError::Sim(SimError::Density(d))
            | CliError::SecondOrder(SecondOrderError::Density(d)) => density_code(d),
            CliError::Sim(SimError::AllZero | SimError::NanScore | SimError::ThreadPool(_)) => {
                EXIT_NUMERIC
            }
            CliError::SecondOrder(
                SecondOrderError::NotPsd
                | SecondOrderError::ShapeMismatch
                | SecondOrderError::InfiniteDensity,
            ) => EXIT_NUMERIC,
            _ => EXIT_VALIDATION,
        }
    }
}

fn density_code(d: &DensityError) -> u8 {
    match d {
        DensityError::ZeroConditioning => EXIT_NUMERIC,
        _ => EXIT_VALIDATION,
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
