use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// What produced the artifacts of one subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub flags: serde_json::Value,
    /// Input path → sha256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Output file name → sha256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

/// Entries keyed by subcommand; a rerun replaces its own entry only.
pub type Manifest = BTreeMap<String, ManifestEntry>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            CliError::Input(format!("missing input {}", path.display()))
        }
        _ => CliError::Input(format!("cannot read {}: {e}", path.display())),
    })
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_input(path)?)
        .map_err(|_| CliError::Input(format!("{} is not UTF-8 text", path.display())))
}

/// Collects artifacts of one run, then writes them and the manifest entry.
pub struct Run {
    pub dir: PathBuf,
    /// Failure reported after the artifacts are written.
    pub deferred: Option<CliError>,
    entry: ManifestEntry,
    files: Vec<(String, Vec<u8>)>,
}

impl Run {
    pub fn new(dir: &Path, subcommand: &str, seed: u64, flags: serde_json::Value) -> Run {
        Run {
            dir: dir.to_path_buf(),
            deferred: None,
            entry: ManifestEntry {
                subcommand: subcommand.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                flags,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
            },
            files: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.entry
            .inputs
            .insert(path.display().to_string(), sha256_hex(bytes));
    }

    /// Reference embedded in JSON artifacts.
    pub fn stamp(&self) -> serde_json::Value {
        serde_json::json!({ "file": MANIFEST_FILE, "entry": self.entry.subcommand })
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    /// Adds a JSON object carrying a `manifest` reference.
    pub fn add_json(&mut self, name: &str, body: serde_json::Value) {
        let mut obj = serde_json::Map::new();
        obj.insert("manifest".into(), self.stamp());
        match body {
            serde_json::Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut text =
            serde_json::to_string_pretty(&serde_json::Value::Object(obj)).expect("json value");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        let io = |p: &Path, e: std::io::Error| {
            CliError::Input(format!("cannot write {}: {e}", p.display()))
        };
        std::fs::create_dir_all(&self.dir).map_err(|e| io(&self.dir, e))?;
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| io(&path, e))?;
            self.entry.outputs.insert(name.clone(), sha256_hex(bytes));
        }
        let path = self.dir.join(MANIFEST_FILE);
        let mut manifest: Manifest = std::fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .unwrap_or_default();
        manifest.insert(self.entry.subcommand.clone(), self.entry);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io(&path, e))
    }
}
