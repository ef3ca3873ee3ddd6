use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = PaciError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PaciError {
    #[error("insufficient history at day {day}: need at least {required} prior days")]
    InsufficientHistory { day: usize, required: usize },

    #[error("series too short: {len} days, need at least {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("day index {day} is outside the series (length {len})")]
    DayOutOfRange { day: usize, len: usize },

    #[error("missing calendar day between {prev} and {next}")]
    MissingDay { prev: NaiveDate, next: NaiveDate },

    #[error("dates not strictly increasing at {date}")]
    DatesNotIncreasing { date: NaiveDate },

    #[error("negative count {value} in column `{column}` on line {line}")]
    NegativeCount {
        column: String,
        value: String,
        line: usize,
    },

    #[error("invalid input on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unexpected CSV header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("invalid judgements: {0}")]
    Judgements(String),

    #[error("invalid value function: {0}")]
    ValueFunction(String),

    #[error("invalid model configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("points come from different model configurations (`{left}` vs `{right}`)")]
    ConfigMismatch { left: String, right: String },

    #[error("weight polyhedron is empty: {0}")]
    EmptyPolyhedron(String),

    #[error("invalid perturbation spec: {0}")]
    Perturbation(String),

    #[error("pivot day {pivot} out of range for a matrix of {len} rows")]
    PivotOutOfRange { pivot: usize, len: usize },

    #[error("no pre-pivot day with positive incidence to estimate severity ratios")]
    NoPrePivotActivity,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PaciError {
    /// Stable machine-readable tag, used by the CLI and the HTTP layer.
    pub fn kind(&self) -> &'static str {
        match self {
            PaciError::InsufficientHistory { .. } => "insufficient-history",
            PaciError::SeriesTooShort { .. } => "series-too-short",
            PaciError::DayOutOfRange { .. } => "day-out-of-range",
            PaciError::MissingDay { .. } => "missing-day",
            PaciError::DatesNotIncreasing { .. } => "dates-not-increasing",
            PaciError::NegativeCount { .. } => "negative-count",
            PaciError::Parse { .. } => "parse",
            PaciError::Header { .. } => "header",
            PaciError::Judgements(_) => "judgements",
            PaciError::ValueFunction(_) => "value-function",
            PaciError::Config(_) => "config",
            PaciError::ConfigMismatch { .. } => "config-mismatch",
            PaciError::EmptyPolyhedron(_) => "empty-polyhedron",
            PaciError::Perturbation(_) => "perturbation",
            PaciError::PivotOutOfRange { .. } => "pivot-out-of-range",
            PaciError::NoPrePivotActivity => "no-pre-pivot-activity",
            PaciError::Csv(_) => "csv",
            PaciError::Json(_) => "json",
            PaciError::Io(_) => "io",
        }
    }
}
