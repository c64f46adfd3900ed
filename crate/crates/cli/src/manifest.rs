use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use attnmem_core::io::json::write_json;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub threads: usize,
    pub args: serde_json::Value,
    /// SHA-256 of every input file; directories hash their sorted entries.
    pub inputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Files hash their bytes; directories hash `name\0digest\n` over their
/// regular files in name order.
pub fn digest_path(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return sha256_file(path);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let mut h = Sha256::new();
    for p in entries {
        h.update(p.file_name().unwrap_or_default().as_encoded_bytes());
        h.update([0]);
        h.update(sha256_file(&p)?.as_bytes());
        h.update([b'\n']);
    }
    Ok(hex::encode(h.finalize()))
}

/// Where the manifest goes when `--manifest` is absent.
pub fn default_path(out: Option<&Path>, out_is_dir: bool) -> PathBuf {
    match out {
        Some(dir) if out_is_dir => dir.join("manifest.json"),
        Some(file) => {
            let mut name = file.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            file.with_file_name(name)
        }
        None => PathBuf::from("attnmem.manifest.json"),
    }
}

pub fn write(path: &Path, command: &str, threads: usize, args: &impl Serialize, inputs: &[&Path]) -> Result<Manifest> {
    let mut digests = BTreeMap::new();
    for p in inputs {
        digests.insert(p.display().to_string(), digest_path(p)?);
    }
    let manifest = Manifest {
        tool: "attnmem",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        threads,
        args: serde_json::to_value(args)?,
        inputs: digests,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    write_json(&manifest, path)?;
    Ok(manifest)
}
