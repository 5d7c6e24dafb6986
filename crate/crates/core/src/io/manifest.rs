use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Record of one command invocation: enough to rerun it and to check that
/// the rerun saw the same inputs and produced the same outputs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_digest: Option<String>,
    /// Input path to content digest.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    /// Output path to content digest.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rungs: Option<usize>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String]) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: args.to_vec(),
            ..Default::default()
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<String> {
        let d = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), d.clone());
        Ok(d)
    }

    pub fn add_output(&mut self, path: &Path) -> Result<String> {
        let d = sha256_file(path)?;
        self.outputs.insert(path.display().to_string(), d.clone());
        Ok(d)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Input files whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|(p, d)| sha256_file(Path::new(p)).map_or(true, |now| &now != *d))
            .map(|(p, _)| p.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip_and_input_check() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.csv");
        std::fs::write(&input, "x").unwrap();
        let mut m = RunManifest::new("simulate", &["--n".into(), "3".into()]);
        m.seed = Some(4);
        m.add_input(&input).unwrap();
        let path = dir.path().join("m.json");
        m.write(&path).unwrap();
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(back, m);
        assert!(back.changed_inputs().is_empty());
        std::fs::write(&input, "y").unwrap();
        assert_eq!(back.changed_inputs().len(), 1);
    }
}
