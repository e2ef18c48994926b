//! Run manifests: enough to reproduce an invocation byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::{write_file, FormatError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL: &str = "scusum";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Canonical arguments, without `--out`; `replay` re-parses these.
    pub argv: Vec<String>,
    /// Arguments as typed.
    pub invocation: Vec<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    /// Subcommand-specific facts about the run.
    pub details: serde_json::Value,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(format!("manifest serialization: {e}")))?;
        write_file(&dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: not a manifest: {e}", path.display())))?;
        if manifest.tool != TOOL {
            return Err(CliError::Usage(format!(
                "{}: written by {:?}, not {TOOL}",
                path.display(),
                manifest.tool
            )));
        }
        match manifest.argv.first().map(String::as_str) {
            Some("detect" | "simulate" | "bench") => Ok(manifest),
            other => Err(CliError::Usage(format!(
                "{}: cannot replay subcommand {other:?}",
                path.display()
            ))),
        }
    }
}
