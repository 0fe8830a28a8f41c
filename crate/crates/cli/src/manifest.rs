use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

/// Run record written next to every output. Holds no timestamps so that
/// identical runs produce identical manifests.
pub struct Manifest {
    command: String,
    seed: Option<u64>,
    config: Map<String, Value>,
    inputs: Map<String, Value>,
    parameters: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Manifest {
            command: command.into(),
            seed,
            config: Map::new(),
            inputs: Map::new(),
            parameters: Map::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.config.insert(key.into(), value.into());
        self
    }

    /// Full-precision fitted or generating parameters.
    pub fn parameter(&mut self, key: &str, value: f64) -> &mut Self {
        self.parameters.insert(key.into(), json!(value));
        self
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) -> &mut Self {
        self.inputs.insert(path.display().to_string(), json!(sha256_hex(bytes)));
        self
    }

    /// Copies entries from `other` that are not already set here.
    pub fn merge(&mut self, other: &Manifest) -> &mut Self {
        for (mine, theirs) in [
            (&mut self.config, &other.config),
            (&mut self.inputs, &other.inputs),
            (&mut self.parameters, &other.parameters),
        ] {
            for (k, v) in theirs {
                mine.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }
        self
    }

    pub fn to_json(&self) -> String {
        let v = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "parameters": self.parameters,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn manifest_is_deterministic() {
        let mut a = Manifest::new("fit", Some(3));
        a.config("epsilon", 0.01).parameter("alpha", 10.0).input(Path::new("x.tsv"), b"abc");
        let mut b = Manifest::new("fit", Some(3));
        b.config("epsilon", 0.01).parameter("alpha", 10.0).input(Path::new("x.tsv"), b"abc");
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.to_json().contains("\"command\": \"fit\""));
    }
}
