use std::path::PathBuf;

use binorbit_core::checks::CheckError;
use binorbit_core::digits::DigitError;
use binorbit_core::orbit::OrbitError;
use binorbit_core::streamspec::SpecError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("bad stream spec: {0}")]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Digits(#[from] DigitError),
    #[error("{0}")]
    Orbit(OrbitError),
    #[error("{0}")]
    Check(CheckError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::Digit(d) => CliError::Digits(d),
            e => CliError::Orbit(e),
        }
    }
}

impl From<CheckError> for CliError {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Orbit(o) => o.into(),
            e => CliError::Check(e),
        }
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Spec(_) => "spec",
            CliError::Digits(_) => "digits",
            CliError::Orbit(_) => "orbit",
            CliError::Check(_) => "check",
            CliError::Io { .. } => "io",
            CliError::Output(_) | CliError::Csv(_) | CliError::Json(_) => "output",
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: ErrorBody<'a>,
}

/// One-line JSON description of an error, for `--error-json`.
pub fn error_json(kind: &str, message: &str, exit_code: i32) -> String {
    let doc = ErrorDoc { error: ErrorBody { kind, message: message.to_string(), exit_code } };
    serde_json::to_string(&doc).expect("error document serializes")
}
