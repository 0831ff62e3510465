use thiserror::Error;

/// Errors surfaced by the data, model, influence, and attribution layers.
#[derive(Debug, Error)]
pub enum AvaError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed row {row}: expected {expected} fields, found {found}")]
    MalformedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("unknown label column `{0}`")]
    UnknownLabelColumn(String),

    #[error("column `{column}` row {row}: cannot parse `{value}` as a number")]
    NonNumericCell {
        column: String,
        row: usize,
        value: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("capability `{capability}` not supported by {model}")]
    CapabilityMissing {
        capability: &'static str,
        model: &'static str,
    },

    #[error("solver failed: {0}")]
    SolverFailed(String),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("all selected influence weights are zero; enable the uniform-weight fallback or increase k")]
    ZeroWeightNeighborhood,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("gold set is empty: the pruned tree is leaf-only on this dataset")]
    EmptyGoldSet,

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, AvaError>;
