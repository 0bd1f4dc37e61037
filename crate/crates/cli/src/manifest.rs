//! Run manifests: what was run, with which configuration and seed, and the
//! digests of every input and output. No paths or timestamps, so identical
//! runs produce identical manifests.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use twingap::{Error, Result};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted: Option<serde_json::Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn digest_file(path: &Path, name: String) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        name,
        sha256: sha256_hex(&bytes),
    })
}

/// File name without its directory.
pub fn base_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

impl Manifest {
    pub fn new<C: Serialize>(command: &'static str, config: &C, seed: Option<u64>) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(Manifest {
            tool: "twingap",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: sha256_hex(serde_json::to_string(&config)?.as_bytes()),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            planted: None,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
