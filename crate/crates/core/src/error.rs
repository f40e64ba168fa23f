use thiserror::Error;

/// Errors produced anywhere in the estimation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("series too short: {len} samples, need more than {required}")]
    SeriesTooShort { len: usize, required: usize },
    #[error("series has no ground-truth SOC channel")]
    MissingGroundTruth,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial SOC {0} is outside [0, 1]")]
    InvalidSoc0(f64),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("too few rows to split: {0} (need at least 10)")]
    TooFewRows(usize),
    #[error("damped normal equations are not positive definite")]
    SingularSystem,
    #[error("training loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("{flagged} of {len} samples flagged as outliers (limit {limit})")]
    TooManyOutliers { flagged: usize, len: usize, limit: usize },
    #[error("channel `{0}` is degenerate (max <= min)")]
    DegenerateChannel(&'static str),
    #[error("no charge or discharge segments: current never leaves the deadband")]
    NoSegments,
    #[error("series channels do not match the estimator: {0}")]
    ChannelMismatch(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cutoff violated at start: {0}")]
    CutoffAtStart(String),
    #[error("invalid profile spec: {0}")]
    InvalidSpec(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures raised by the optimizer rather than by the data.
    pub fn is_training_failure(&self) -> bool {
        matches!(self, Error::SingularSystem | Error::NonFiniteLoss(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
