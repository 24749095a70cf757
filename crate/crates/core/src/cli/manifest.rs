use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::CliError;

/// Provenance record written next to every command output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub duration_s: f64,
}

pub(crate) struct ManifestBuilder {
    command: &'static str,
    seed: u64,
    inputs: Vec<String>,
    outputs: Vec<String>,
    started: Instant,
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

impl ManifestBuilder {
    pub fn new(command: &'static str, seed: u64, inputs: &[&Path]) -> Self {
        Self { command, seed, inputs: inputs.iter().map(|p| display(p)).collect(), outputs: vec![], started: Instant::now() }
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(display(path));
    }

    /// Write `bytes` to `path` and record it.
    pub fn write(&mut self, path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        self.output(path);
        Ok(())
    }

    /// Write the manifest to `path` with the resolved `config`.
    pub fn finish(self, path: &Path, config: serde_json::Value) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config,
            inputs: self.inputs,
            outputs: self.outputs,
            duration_s: self.started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
        std::fs::write(path, json).map_err(|e| CliError::io(path, e))?;
        Ok(path.to_path_buf())
    }
}

/// `out.ext` gets `out.ext.manifest.json`.
pub(crate) fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
