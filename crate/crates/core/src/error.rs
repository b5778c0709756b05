use thiserror::Error;

pub type Result<T> = std::result::Result<T, BoutsError>;

#[derive(Debug, Error)]
pub enum BoutsError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("at lambda = {lambda}: {source}")]
    AtPenalty {
        lambda: f64,
        #[source]
        source: Box<BoutsError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BoutsError {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        BoutsError::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        BoutsError::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        BoutsError::Numerical(msg.into())
    }

    /// Innermost error, skipping any penalty context.
    pub fn root(&self) -> &BoutsError {
        match self {
            BoutsError::AtPenalty { source, .. } => source.root(),
            other => other,
        }
    }
}
