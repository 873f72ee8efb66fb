use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A problem with one row of an input file.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based line number in the file (the header is line 1).
    pub line: usize,
    pub column: Option<String>,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(col) => write!(f, "line {}, column `{}`: {}", self.line, col, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("input schema error: {0}")]
    InputSchema(String),

    #[error("{} malformed row(s): {}", .0.len(), join_rows(.0))]
    Rows(Vec<RowError>),

    #[error("data consistency error: {0}")]
    DataConsistency(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unbalanced panel: units missing a period or duplicated: {}", .0.join(", "))]
    UnbalancedPanel(Vec<String>),

    #[error("no units within d_c = {d_c}")]
    EmptySubsample { d_c: f64 },

    #[error("invalid configuration: {0}")]
    InvalidSpec(String),

    #[error("degenerate ring: {ring} ring has {count} unit(s), at least {required} required")]
    DegenerateRing {
        ring: &'static str,
        count: usize,
        required: usize,
    },

    #[error("degenerate cell: {cell} has {count} observation(s), at least {required} required")]
    DegenerateCell {
        cell: String,
        count: usize,
        required: usize,
    },

    #[error("too many bins: L = {bins} needs at least {} units, have {n}", 2 * .bins)]
    TooManyBins { bins: usize, n: usize },

    #[error(
        "degenerate partition: bin {bin} has {count} unit(s) (distance ties); try fewer bins than {bins}"
    )]
    DegeneratePartition {
        bin: usize,
        count: usize,
        bins: usize,
    },

    #[error("insufficient data: n = {n}, at least {required} required")]
    InsufficientData { n: usize, required: usize },

    #[error("variance undefined: bin {bin} has {count} value(s)")]
    VarianceUndefined { bin: usize, count: usize },

    #[error("no affected bins: {0}")]
    NoAffectedBins(String),

    #[error("undefined estimand: {0}")]
    UndefinedEstimand(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(#[from] toml::de::Error),
}

fn join_rows(rows: &[RowError]) -> String {
    rows.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InputSchema(_) | Error::Rows(_) => "input_schema",
            Error::DataConsistency(_) => "data_consistency",
            Error::EmptyInput(_) => "empty_input",
            Error::UnbalancedPanel(_) => "unbalanced_panel",
            Error::EmptySubsample { .. } => "empty_subsample",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::DegenerateRing { .. } => "degenerate_ring",
            Error::DegenerateCell { .. } => "degenerate_cell",
            Error::TooManyBins { .. } => "too_many_bins",
            Error::DegeneratePartition { .. } => "degenerate_partition",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::VarianceUndefined { .. } => "variance_undefined",
            Error::NoAffectedBins(_) => "no_affected_bins",
            Error::UndefinedEstimand(_) => "undefined_estimand",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
        }
    }
}
