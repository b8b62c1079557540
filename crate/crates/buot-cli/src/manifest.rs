//! Run manifests: every result file references the manifest written next to
//! it, which records the command, the fully resolved configuration, input
//! digests, and versions.
//!
//! The timestamp honors `SOURCE_DATE_EPOCH` so archived runs can be
//! reproduced byte-for-byte.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub timestamp_unix: u64,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, inputs: Vec<InputDigest>) -> Self {
        let timestamp_unix = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        RunManifest {
            command: command.to_string(),
            config,
            inputs,
            timestamp_unix,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, json + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

/// Digest of an input file's bytes.
pub fn digest_file(path: &Path) -> Result<InputDigest, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(InputDigest {
        name: path.display().to_string(),
        sha256: hex_digest(&bytes),
    })
}

/// Digest for synthetic inputs (generators), keyed by their descriptor.
pub fn digest_descriptor(name: &str, descriptor: &str) -> InputDigest {
    InputDigest {
        name: name.to_string(),
        sha256: hex_digest(descriptor.as_bytes()),
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}
