//! Artifact staging: files are written into a temporary sibling of the
//! output directory, which replaces the output directory only after every
//! stage succeeded.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use sis_atlas::report::sorted_json;
use sis_atlas::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub status: String,
}

#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
    pub stages: Vec<Stage>,
    /// Solver settings echoed into the manifest.
    pub tolerances: serde_json::Map<String, Value>,
}

impl Artifacts {
    pub fn file(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = sorted_json(value)?;
        self.file(name, text);
        Ok(())
    }

    pub fn stage(&mut self, name: &str, status: impl Into<String>) {
        self.stages.push(Stage {
            name: name.to_string(),
            status: status.into(),
        });
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub struct ManifestInfo<'a> {
    pub command: &'a str,
    pub config: Value,
    pub nodes: usize,
    pub wall_time: f64,
}

fn manifest(info: &ManifestInfo, art: &Artifacts) -> Value {
    let files: Vec<Value> = art
        .files
        .iter()
        .map(|(name, text)| json!({ "name": name, "sha256": sha256_hex(text.as_bytes()), "bytes": text.len() }))
        .collect();
    json!({
        "artifactVersion": env!("CARGO_PKG_VERSION"),
        "command": info.command,
        "config": info.config,
        "gridNodes": info.nodes,
        "tolerances": Value::Object(art.tolerances.clone()),
        "wallTimeSeconds": info.wall_time,
        "stages": art.stages,
        "files": files,
    })
}

/// Writes every artifact plus `manifest.json` and swaps the result into
/// `out`.
pub fn commit(out: &Path, art: &Artifacts, info: &ManifestInfo) -> io::Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => Path::new(".").to_path_buf(),
    };
    fs::create_dir_all(&parent)?;
    let staging = tempfile::Builder::new()
        .prefix(".atlas-staging")
        .tempdir_in(&parent)?;
    for (name, text) in &art.files {
        fs::write(staging.path().join(name), text)?;
    }
    let manifest = sorted_json(&manifest(info, art)).map_err(io::Error::other)?;
    fs::write(staging.path().join("manifest.json"), manifest)?;

    // An existing output directory is moved onto an empty placeholder that
    // is deleted when `old` drops.
    let old = tempfile::Builder::new()
        .prefix(".atlas-previous")
        .tempdir_in(&parent)?;
    if out.exists() {
        fs::rename(out, old.path())?;
    }
    let staged = staging.keep();
    if let Err(e) = fs::rename(&staged, out) {
        let _ = fs::remove_dir_all(&staged);
        return Err(e);
    }
    Ok(())
}
