use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Numerical(#[from] enif::Error),
}

impl LabError {
    /// Process exit code: 2 for configuration and input problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        use enif::Error as E;
        match self {
            LabError::Config(_) | LabError::Io(_) | LabError::Json(_) => 2,
            LabError::Numerical(e) => match e {
                E::Io(_)
                | E::Csv(_)
                | E::Parse { .. }
                | E::InvalidInput(_)
                | E::DimensionMismatch { .. }
                | E::InvalidPermutation(_)
                | E::OrderTooLarge { .. }
                | E::TooFewStates { .. }
                | E::GridTooLargeForOracle { .. }
                | E::WeightsNotNormalised { .. }
                | E::UnstableStep { .. } => 2,
                _ => 3,
            },
        }
    }
}

impl From<toml::de::Error> for LabError {
    fn from(e: toml::de::Error) -> Self {
        LabError::Config(e.to_string())
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
