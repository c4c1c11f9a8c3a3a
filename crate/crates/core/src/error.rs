use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("row {row}, column `{column}`: category `{value}` is not in the allowed list")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: value {value} violates declared bounds")]
    BoundsViolation {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("split leaves class `{0}` without training rows")]
    DegenerateSplit(String),

    #[error("excluding class `{0}` leaves no rows")]
    EmptyComplement(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("bounded sampling exhausted its redraw cap for bounds [{lower}, {upper}]")]
    SamplingStarved { lower: f64, upper: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("training data contains fewer than two classes")]
    DegenerateTraining,

    #[error("class `{0}` has no rows to oversample")]
    EmptyClass(String),

    #[error("class `{0}` has fewer than two rows; no neighbors to interpolate with")]
    InsufficientNeighbors(String),

    #[error("length mismatch: {left} true labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("cannot report on an empty evaluation")]
    EmptyEvaluation,

    #[error("prediction file: {0}")]
    Predictions(String),

    #[error("class `{class}` starved: acceptance rate {acceptance_rate:.6}")]
    AcceptanceStarved { class: String, acceptance_rate: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidSchema(_) | Error::Toml(_) => 1,
            Error::AcceptanceStarved { .. } => 3,
            _ => 2,
        }
    }
}
