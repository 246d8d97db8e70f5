use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Provenance of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of `config`, hex.
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub workers: usize,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
    /// Canonical configuration text; feeding it back through `--config` reproduces the run.
    pub config: String,
}

pub fn config_hash(text: &str) -> String {
    config_hash_bytes(text.as_bytes())
}

pub fn config_hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(command: &str, config: String, seed: u64, workers: usize) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash(&config),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            workers,
            started_at: now(),
            finished_at: String::new(),
            outputs: Vec::new(),
            config,
        }
    }

    /// File stem shared by every output of the run.
    pub fn stem(&self) -> String {
        format!("{}-{}-seed{}", self.command, &self.config_hash[..12], self.seed)
    }
}
