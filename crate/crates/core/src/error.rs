use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("outcome column absent: {0}")]
    OutcomeColumnAbsent(String),
    #[error("duplicate column name: {0}")]
    DuplicateColumn(String),
    #[error("no usable rows")]
    NoUsableRows,
    #[error("all predictors removed by the variance filter")]
    AllPredictorsFiltered,
    #[error("too few rows: {0}")]
    TooFewRows(String),
    #[error("degenerate column {0}: zero standard deviation on the training split")]
    DegenerateColumn(String),
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("constant input: {0}")]
    ConstantInput(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
