//! Provenance record written next to every simulation output.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::Runtime;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub timestamp: u64,
    pub root_seed: u64,
    pub outputs: Vec<PathBuf>,
    pub runtimes: Vec<Runtime>,
}

/// SHA-256 of the config's canonical form: the parsed key/value tree
/// serialized as JSON with sorted keys. Layout, comments and key order do
/// not affect it.
pub fn config_hash(text: &str) -> Result<String> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string().trim().to_string()]))?;
    // serde_json's default map is ordered, so this is canonical
    let canonical = serde_json::to_value(&table)
        .and_then(|v| serde_json::to_string(&v))
        .map_err(|e| Error::domain(format!("cannot canonicalize config: {e}")))?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(config_text: &str, root_seed: u64, outputs: Vec<PathBuf>, runtimes: Vec<Runtime>) -> Result<Self> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(RunManifest {
            config_hash: config_hash(config_text)?,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            root_seed,
            outputs,
            runtimes,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::domain(format!("cannot serialize manifest: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_layout_and_order() {
        let a = "scenario = \"mse_eb\"\nseed = 3\neb = { c1 = 2.0, c2 = 1.0 }\n";
        let b = "# comment\n\n  seed=3\n[eb]\nc2 = 1.0\nc1   = 2.0\n";
        let b = format!("scenario = 'mse_eb'\n{b}");
        assert_eq!(config_hash(a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(a).unwrap().len(), 64);
        assert_ne!(config_hash(a).unwrap(), config_hash("scenario = \"mse_eb\"\nseed = 4").unwrap());
    }

    #[test]
    fn manifest_serializes() {
        let m = RunManifest::new("seed = 1", 1, vec!["out/report.csv".into()], vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        m.write(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["root_seed"], 1);
        assert_eq!(v["outputs"][0], "out/report.csv");
    }
}
