use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

/// Per-run bookkeeping: files read and written, parameters and results.
pub struct Run {
    pub digits: Option<u32>,
    pub jobs: usize,
    command: &'static str,
    arguments: Vec<String>,
    started: Instant,
    inputs: Vec<Value>,
    outputs: Vec<Value>,
    parameters: Map<String, Value>,
    results: Map<String, Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Run {
    pub fn new(command: &'static str, arguments: Vec<String>, digits: Option<u32>, jobs: usize) -> Self {
        let mut parameters = Map::new();
        parameters.insert("digits".into(), json!(digits));
        parameters.insert("jobs".into(), json!(jobs));
        Run {
            digits,
            jobs,
            command,
            arguments,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            parameters,
            results: Map::new(),
        }
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(json!({ "path": path.display().to_string(), "sha256": sha256_hex(&bytes) }));
        Ok(bytes)
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), Failure> {
        fs::write(path, bytes).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(json!({ "path": path.display().to_string(), "sha256": sha256_hex(bytes) }));
        Ok(())
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.into(), value.into());
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.into(), value.into());
    }

    pub fn finish(self, exit_code: u8, error: Option<&str>) -> Value {
        json!({
            "tool": "prtspace",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "arguments": self.arguments,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
            "exit_code": exit_code,
            "error": error,
            "results": self.results,
        })
    }
}

pub fn write_manifest(path: &PathBuf, manifest: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text)
}
