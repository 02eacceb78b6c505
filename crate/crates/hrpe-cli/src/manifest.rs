//! Run manifest written beside every result bundle.
//!
//! The manifest ties outputs back to their exact inputs: the tool version,
//! a SHA-256 digest of the snapshot that was processed, and the fully
//! resolved configuration (defaults filled in). Re-running the tool on a
//! file with a matching digest and the echoed config reproduces the bundle.

use std::io::Read;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::EstimateConfig;
use crate::error::{CliError, Result};

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Seconds since the Unix epoch; provenance only, never an input.
    pub created_unix: u64,
    pub input_file: String,
    /// Hex SHA-256 of the input snapshot bytes.
    pub input_sha256: String,
    pub config: EstimateConfig,
}

impl RunManifest {
    pub fn new(input: &Path, config: EstimateConfig) -> Result<Self> {
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            input_file: input.display().to_string(),
            input_sha256: sha256_file(input)?,
            config,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::format(Path::new("manifest.toml"), e.to_string()))
    }

    pub fn from_toml(path: &Path, text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::format(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(path, &text)
    }
}

/// Streaming hex SHA-256 of a file.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
