use thiserror::Error;

/// Every failure the simulator can report.
///
/// Variants map onto the coarse categories the command-line front end
/// prints, see [`CaosError::category`].
#[derive(Debug, Error)]
pub enum CaosError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape error: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("framing error: {0}")]
    Framing(String),

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CaosError {
    /// Short machine-readable tag.
    pub fn category(&self) -> &'static str {
        match self {
            CaosError::Domain(_) => "domain",
            CaosError::OutOfRange(_) => "out_of_range",
            CaosError::Capacity(_) => "capacity",
            CaosError::Config(_) => "config",
            CaosError::Shape { .. } => "shape",
            CaosError::Framing(_) => "framing",
            CaosError::Calibration(_) => "calibration",
            CaosError::Measurement(_) => "measurement",
            CaosError::Parse(_) => "parse",
            CaosError::Io(_) => "io",
        }
    }

    /// True for errors caused by invalid user input rather than a failure
    /// while running a pipeline.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            CaosError::Domain(_)
                | CaosError::OutOfRange(_)
                | CaosError::Capacity(_)
                | CaosError::Config(_)
                | CaosError::Parse(_)
        )
    }
}

impl From<csv::Error> for CaosError {
    fn from(e: csv::Error) -> Self {
        CaosError::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for CaosError {
    fn from(e: toml::de::Error) -> Self {
        CaosError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CaosError>;
