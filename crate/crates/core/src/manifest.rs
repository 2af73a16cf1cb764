//! Run manifests embedded in every output artifact.
//!
//! A manifest records the subcommand, every resolved flag except the
//! output location, SHA-256 digests of the inputs, the seed, the tool
//! version and a timestamp. JSON artifacts carry it as a `manifest` field;
//! CSV artifacts carry it as a single `# manifest: {...}` comment line.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Honoured for reproducible timestamps.
pub const SOURCE_DATE_EPOCH: &str = "SOURCE_DATE_EPOCH";

const CSV_PREFIX: &str = "manifest: ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    /// Input name to hex SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn now() -> Result<u64> {
    match std::env::var(SOURCE_DATE_EPOCH) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SOURCE_DATE_EPOCH} must be an integer, got {v:?}"))),
        Err(_) => Ok(std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())),
    }
}

impl RunManifest {
    pub fn new(command: &str) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            flags: BTreeMap::new(),
            inputs: BTreeMap::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: now()?,
        })
    }

    pub fn flag(mut self, key: &str, value: impl ToString) -> Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(mut self, name: &str, path: &Path) -> Result<Self> {
        self.inputs.insert(name.to_string(), sha256_file(path)?);
        Ok(self)
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Comment text for CSV artifacts (without the leading `# `).
    pub fn csv_comment(&self) -> String {
        format!("{CSV_PREFIX}{}", serde_json::to_string(self).expect("manifest serializes"))
    }

    /// Reads the manifest from a JSON artifact's `manifest` field or from a
    /// CSV artifact's leading comment.
    pub fn read_from(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = String::new();
        BufReader::new(file)
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        if let Some(rest) = first.trim_end().strip_prefix("# ").and_then(|l| l.strip_prefix(CSV_PREFIX)) {
            return Ok(serde_json::from_str(rest)?);
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let manifest = value
            .get("manifest")
            .cloned()
            .ok_or_else(|| Error::Config(format!("{} carries no manifest", path.display())))?;
        Ok(serde_json::from_value(manifest)?)
    }
}
