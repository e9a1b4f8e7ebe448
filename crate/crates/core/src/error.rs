use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("bin index {index} out of range for sweep of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("history marker {marker} undefined at bin {t}")]
    MarkerUndefined { marker: &'static str, t: usize },
    #[error("unknown model term `{0}`")]
    UnknownTerm(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate response: all {n} responses equal {value}")]
    DegenerateResponse { n: usize, value: u8 },
    #[error("design has no rows")]
    EmptyDesign,
    #[error("information matrix is singular or not positive definite")]
    Singular,
    #[error("schema mismatch: model terms {model:?} vs design terms {design:?}")]
    SchemaMismatch { model: Vec<String>, design: Vec<String> },
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    #[error("degenerate abscissa: all x values equal")]
    DegenerateAbscissa,
    #[error("degenerate labels: need both positive and negative labels")]
    DegenerateLabels,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("study failed: all {0} replications were dropped")]
    AllDropped(usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ProError {
    fn from(e: std::io::Error) -> Self {
        ProError::Io(e.to_string())
    }
}

pub type Result<T, E = ProError> = std::result::Result<T, E>;
