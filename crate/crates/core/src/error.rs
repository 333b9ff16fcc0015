use thiserror::Error;

use crate::backtest::BacktestError;
use crate::config::ConfigError;
use crate::market_data::DataError;
use crate::optimizer::SolverError;
use crate::qubo::QuboError;
use crate::report::ReportError;
use crate::stats::StatsError;

/// Crate-wide error. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_IO: i32 = 5;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 config, 3 data, 4 solver, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => EXIT_CONFIG,
            Error::Data(DataError::Io { .. }) | Error::Data(DataError::Cache { .. }) => EXIT_IO,
            Error::Data(_) | Error::Stats(_) => EXIT_DATA,
            Error::Solver(_) | Error::Qubo(_) => EXIT_SOLVER,
            Error::Backtest(e) => e.exit_code(),
            Error::Report(_) => EXIT_DATA,
            Error::Io { .. } => EXIT_IO,
        }
    }
}
