//! Command-line front end for the rotor qubit simulator.
//!
//! `rotorq <command> --config <file> [--out <dir>] [--threads k]`

pub mod commands;
pub mod config;
pub mod output;

use std::io;
use std::path::{Path, PathBuf};

use rotorq_core::{Execution, RotorError};
use serde_json::json;
use thiserror::Error;

pub use config::{load_config, parse_config, Command, ConfigError, RunConfig};
use output::{Artifacts, Meta};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Rotor(#[from] RotorError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("leakage {leakage:.3e} out of the qubit subspace exceeds {limit:.0e}")]
    Leakage { leakage: f64, limit: f64 },
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Rotor(e) if e.is_numerical() => 3,
            CliError::Rotor(_) => 2,
            CliError::Leakage { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(e) => e.kind(),
            CliError::Rotor(RotorError::NormDrift { .. }) => "norm_drift",
            CliError::Rotor(e) if e.is_numerical() => "numerical",
            CliError::Rotor(_) => "invalid_input",
            CliError::Leakage { .. } => "leakage",
            CliError::Io(_) => "io",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Config(c) = self {
            if let Some(key) = c.key() {
                v["key"] = json!(key);
            }
            if let Some(line) = c.line() {
                v["line"] = json!(line);
            }
        }
        v
    }
}

/// Loads the config, runs the command and returns the files written.
pub fn run(command: Command, config_path: &Path, out_dir: &Path, exec: Execution) -> Result<Vec<PathBuf>, CliError> {
    let (config, bytes) = load_config(config_path, Some(command))?;
    let mut artifacts = Artifacts::new(out_dir, Meta::new(command.name(), &bytes))?;
    commands::dispatch(&config, &mut artifacts, exec)?;
    Ok(artifacts.written().to_vec())
}
