//! Run manifests written next to every artifact.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "hopkit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything that determines a command's outputs. Contains no clock or host data,
/// so equal configs imply byte-identical outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub args: BTreeMap<String, Value>,
    /// Input path → sha256 of its content.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub seeds: Vec<u64>,
    /// Resource name (pool, lexicon, rules, ...) → content digest.
    pub resources: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new<I, S>(command: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn arg(&mut self, name: &str, value: impl Into<Value>) -> &mut Self {
        self.args.insert(name.into(), value.into());
        self
    }

    pub fn input(&mut self, path: &Path) -> io::Result<&mut Self> {
        let bytes = fs::read(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn resource(&mut self, name: &str, digest: impl Into<String>) -> &mut Self {
        self.resources.insert(name.into(), digest.into());
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run config serializes");
        s.push('\n');
        s
    }

    /// Writes `<artifact>.runconfig.json` and returns its path.
    pub fn write_sidecar(&self, artifact: &Path) -> io::Result<PathBuf> {
        let path = sidecar_path(artifact);
        fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".runconfig.json");
    artifact.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_naming() {
        assert_eq!(sidecar_path(Path::new("out/dev.json")), PathBuf::from("out/dev.json.runconfig.json"));
    }

    #[test]
    fn equal_configs_serialize_identically() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.json");
        fs::write(&input, "[]").unwrap();
        let build = || {
            let mut rc = RunConfig::new(["gen", "debias"]);
            rc.arg("variant", "add2").input(&input).unwrap();
            rc.seeds = vec![1, 2];
            rc.to_json()
        };
        assert_eq!(build(), build());
        assert!(build().contains(&sha256_hex(b"[]")));
    }
}
