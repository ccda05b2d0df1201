use schemars::JsonSchema;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tbg_core::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Machine-readable error object printed on failure.
#[derive(Debug, Serialize, JsonSchema)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize, JsonSchema)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    /// Variant name of the underlying error, e.g. `EmptyKernel`.
    pub fn kind(&self) -> String {
        match self {
            Self::Core(e) => {
                let d = format!("{e:?}");
                d.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Core").to_string()
            }
            Self::Config(_) => "Config".into(),
            Self::Io(_) => "Io".into(),
            Self::Json(_) => "Json".into(),
            Self::Csv(_) => "Csv".into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 64,
            Self::Core(_) => 2,
            _ => 74,
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport { error: ErrorBody { kind: self.kind(), message: self.to_string(), exit_code: self.exit_code() } }
    }
}
