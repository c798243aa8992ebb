//! Provenance stamped into every report: tool version, seed and a hash of
//! the result-affecting configuration.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Package version plus `git describe` of the build tree.
pub const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (",
    env!("MATINAR_GIT_DESCRIBE"),
    ")"
);

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    /// SHA-256 of the command name and its JSON-serialised arguments.
    /// Output paths and the worker count are excluded: they do not change
    /// results.
    pub config_hash: String,
    pub config: serde_json::Value,
}

impl RunMeta {
    pub fn new<C: Serialize>(
        command: &'static str,
        seed: Option<u64>,
        config: &C,
    ) -> anyhow::Result<Self> {
        let config = serde_json::to_value(config)?;
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update([0]);
        hasher.update(serde_json::to_vec(&config)?);
        Ok(RunMeta {
            tool: "matinar",
            version: VERSION,
            command,
            seed,
            config_hash: format!("{:x}", hasher.finalize()),
            config,
        })
    }
}
