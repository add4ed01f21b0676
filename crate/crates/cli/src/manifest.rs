use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Serialize;

/// Record of one run, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<String>,
    pub flags: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub argv: Vec<String>,
    pub started: DateTime<Utc>,
    pub finished: Option<DateTime<Utc>>,
}

impl RunManifest {
    pub fn start(subcommand: &str, inputs: &[&Path], flags: serde_json::Value, seed: u64, argv: &[String]) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            flags,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            argv: argv.to_vec(),
            started: Utc::now(),
            finished: None,
        }
    }

    pub fn finish(mut self) -> Self {
        self.finished = Some(Utc::now());
        self
    }
}
