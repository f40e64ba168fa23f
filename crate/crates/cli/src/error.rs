use std::fmt;

/// Error carrying the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unknown presets, invalid configuration. Exit 2.
    Usage(String),
    /// Unreadable or inconsistent input data, IO failures. Exit 3.
    Data(String),
    /// The optimizer could not make progress. Exit 4.
    Training(String),
    /// `selftest` found failing checks. Exit 1.
    SelfTest(usize),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Training(_) => 4,
            CliError::SelfTest(_) => 1,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Training(m) => write!(f, "training failed: {m}"),
            CliError::SelfTest(n) => write!(f, "selftest: {n} check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hess_soc::Error> for CliError {
    fn from(e: hess_soc::Error) -> Self {
        use hess_soc::Error as E;
        if e.is_training_failure() {
            return CliError::Training(format!("{e}; try a different --seed or a larger mu_max"));
        }
        match e {
            E::UnknownPreset(name) => CliError::Usage(format!(
                "unknown preset `{name}` (available: {})",
                hess_soc::sim::PRESET_NAMES.join(", ")
            )),
            E::InvalidConfig(_) => CliError::Usage(e.to_string()),
            E::MissingGroundTruth => {
                CliError::Data("dataset has no soc column; training needs ground truth".into())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("json: {e}"))
    }
}
