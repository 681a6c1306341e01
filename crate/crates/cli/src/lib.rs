//! Batch runner: parses experiment configs, drives the characterize, plan,
//! simulate, mitigate and cost pipelines, and writes CSV tables and SVG plots.

pub mod config;
pub mod output;
pub mod pipeline;

use serde_json::json;

use config::Violation;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<Violation>),

    #[error(transparent)]
    Numerical(#[from] noise_forge::Error),

    #[error("cannot write {target}: {message}")]
    Output { target: String, message: String },
}

impl CliError {
    pub fn output(target: &str, e: impl std::fmt::Display) -> Self {
        CliError::Output {
            target: target.to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Output { .. } => 3,
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> serde_json::Value {
        match self {
            CliError::Config(vs) => json!({
                "error": "config",
                "violations": vs.iter().map(|v| json!({"path": v.path, "message": v.message})).collect::<Vec<_>>(),
            }),
            CliError::Numerical(e) => json!({"error": "numerical", "message": e.to_string()}),
            CliError::Output { target, message } => json!({"error": "output", "target": target, "message": message}),
        }
    }
}
