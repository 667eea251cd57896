use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid label scale [{min}, {max}]: min must be below max")]
    InvalidScale { min: i64, max: i64 },

    #[error("label {label} outside scale [{min}, {max}]")]
    LabelOffScale { label: i64, min: i64, max: i64 },

    #[error("field `{0}` missing from query")]
    MissingField(String),

    #[error("field `{field}` has kind {found}, expected {expected}")]
    WrongKind {
        field: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("group `{0}` is not declared for the sensitive attribute")]
    UnknownGroup(String),

    #[error("target group `{0}` equals the current group")]
    SameGroup(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("identity pool for field `{field}` and group `{group}` is empty")]
    EmptyPool { field: String, group: String },

    #[error("lexicon is not an involution: {0}")]
    NotInvolution(String),

    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),

    #[error("count mismatch: expected {expected} {what}, got {found}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("duplicate response for display item `{0}`")]
    DuplicateResponse(String),

    #[error("unknown display item `{0}`")]
    UnknownDisplayId(String),

    #[error("response from worker `{found}` passed to plan of worker `{expected}`")]
    WorkerMismatch { expected: String, found: String },

    #[error("no usable probe pairs")]
    NoUsablePairs,

    #[error("survey item `{item}` value {value} outside [{min}, {max}]")]
    SurveyOutOfRange {
        item: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("empty survey")]
    EmptySurvey,

    #[error("no weight for worker `{0}`")]
    MissingWeight(String),

    #[error("queries without a sensitive value: {}", .0.join(", "))]
    MissingSensitive(Vec<String>),

    #[error("{path}:{line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
