use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported modulation order {0}; supported orders are 4, 8, 16 and 32")]
    UnsupportedOrder(usize),

    #[error("symbol index {index} out of range for {order}-QAM")]
    IndexOutOfRange { index: usize, order: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("relaxed regions apply only to inner (S4) points, got {0}")]
    NotInnerPoint(String),

    #[error("relaxed design needs inner points; {0}-QAM has none")]
    RelaxedUnsupported(usize),

    #[error("rank-deficient channel (condition number {0:.3e})")]
    RankDeficient(f64),

    #[error("singular KKT system: {0}")]
    SingularKkt(String),

    #[error("oracle enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error("oracle found no certified optimum: {0}")]
    OracleFailed(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config error in key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
