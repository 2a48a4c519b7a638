//! Run manifests written beside every output artifact.
//!
//! The manifest hash covers the tool, version, command, resolved parameters
//! and database hash. The timestamp, output path and results are left out,
//! so the hash (and every artifact that embeds it) is stable across re-runs.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "kdpgvm";
pub const MANIFEST_SUFFIX: &str = ".manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatabaseRef {
    /// `builtin` or the path that was loaded.
    pub source: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command line after the program name.
    pub args: Vec<String>,
    pub params: Value,
    pub database: DatabaseRef,
    pub output: PathBuf,
    pub results: Value,
    pub timestamp: String,
    pub sha256: String,
}

#[derive(Serialize)]
struct Hashed<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    params: &'a Value,
    database_sha256: &'a str,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, params: Value, database: DatabaseRef, output: &Path) -> RunManifest {
        let mut m = RunManifest {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            params,
            database,
            output: output.to_path_buf(),
            results: Value::Null,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            sha256: String::new(),
        };
        m.sha256 = m.content_hash();
        m
    }

    pub fn content_hash(&self) -> String {
        let hashed = Hashed {
            tool: &self.tool,
            version: &self.version,
            command: &self.command,
            params: &self.params,
            database_sha256: &self.database.sha256,
        };
        // serde_json maps are sorted, so this encoding is canonical.
        sha256_hex(&serde_json::to_vec(&hashed).expect("manifest serializes"))
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(MANIFEST_SUFFIX);
        PathBuf::from(name)
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = RunManifest::path_for(&self.output);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("{} is not a run manifest", path.display()))?;
        if m.sha256 != m.content_hash() {
            anyhow::bail!("{}: manifest hash does not match its contents", path.display());
        }
        Ok(m)
    }
}
