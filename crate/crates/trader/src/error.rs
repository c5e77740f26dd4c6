use std::path::PathBuf;

use ctrnn_core::{BacktestError, CycleError, DataError, IndicatorError, NetworkError, SelectionError};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("symbol {symbol}: {source}")]
    Symbol {
        symbol: String,
        #[source]
        source: Box<AppError>,
    },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => EXIT_USAGE,
            AppError::Data(_) | AppError::Io { .. } => EXIT_DATA,
            AppError::Numerical(_) => EXIT_NUMERICAL,
            AppError::Symbol { source, .. } => source.exit_code(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn for_symbol(self, symbol: &str) -> Self {
        match self {
            AppError::Symbol { .. } => self,
            other => AppError::Symbol {
                symbol: symbol.to_string(),
                source: Box::new(other),
            },
        }
    }
}

impl From<DataError> for AppError {
    fn from(e: DataError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<NetworkError> for AppError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::NonFinite(_) => AppError::Numerical(e.to_string()),
            NetworkError::InvalidTopology(_) | NetworkError::InvalidConfig(_) => AppError::Usage(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<CycleError> for AppError {
    fn from(e: CycleError) -> Self {
        match e {
            CycleError::InvalidConfig(_) => AppError::Usage(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<IndicatorError> for AppError {
    fn from(e: IndicatorError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<SelectionError> for AppError {
    fn from(e: SelectionError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<BacktestError> for AppError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::InvalidConfig(_) => AppError::Usage(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
