use thiserror::Error;

/// Process exit codes of the `nfteig` binary.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const THRESHOLD_FAIL: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const NUMERICAL_FAILURE: i32 = 3;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Numerical(#[from] nfteig_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => exit::CONFIG_ERROR,
            HarnessError::Numerical(nfteig_core::Error::InvalidInput(_)) => exit::CONFIG_ERROR,
            HarnessError::Numerical(_) => exit::NUMERICAL_FAILURE,
            // Output failures are not threshold outcomes; treat them as fatal.
            HarnessError::Io(_) | HarnessError::Csv(_) | HarnessError::Json(_) => exit::NUMERICAL_FAILURE,
        }
    }
}
