use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid network: {} issue(s)", .0.len())]
    Validation(Vec<String>),
    #[error("rule rejected: {0}")]
    Rule(String),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("{0} validation metric(s) failed")]
    Failed(usize),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    issues: &'a [String],
}

impl CliError {
    /// 1: failed validation or I/O, 2: bad config or rule, 3: overflow.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) | CliError::Rule(_) => 2,
            CliError::Overflow(_) => 3,
            CliError::Failed(_) | CliError::Other(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Validation(_) => "validation",
            CliError::Rule(_) => "rule",
            CliError::Overflow(_) => "overflow",
            CliError::Failed(_) => "failed",
            CliError::Other(_) => "io",
        }
    }

    pub fn to_json(&self) -> String {
        let issues = match self {
            CliError::Validation(issues) => issues.as_slice(),
            _ => &[],
        };
        let message = match self {
            CliError::Other(e) => format!("{e:#}"),
            other => other.to_string(),
        };
        let body = ErrorJson {
            error: self.kind(),
            message,
            issues,
        };
        serde_json::to_string(&body).expect("error body serializes")
    }
}
