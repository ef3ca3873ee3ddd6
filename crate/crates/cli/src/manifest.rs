use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Record of one batch run, written next to its outputs. It holds no
/// timestamps, so re-running the recorded command reproduces it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: Vec<String>,
    pub input: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(
        command: Vec<String>,
        input: Option<PathBuf>,
        config: Option<PathBuf>,
        outputs: Vec<PathBuf>,
        seed: Option<u64>,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            input,
            config,
            outputs,
            seed,
        }
    }
}
