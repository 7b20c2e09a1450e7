use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration or arguments; nothing has been written.
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("{0}")]
    Runtime(String),
    /// At least one hard invariant or baseline failed; the identifiers are
    /// listed.
    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Runtime(_) | HarnessError::Io { .. } => 3,
            HarnessError::Verification(_) => 4,
        }
    }
}

impl From<muskat_core::Error> for HarnessError {
    fn from(e: muskat_core::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}
