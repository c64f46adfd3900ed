//! File-level conventions: a video is a `<video_id>.stmt` file, a dataset a
//! flat directory of them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use attnmem_core::io::{read_tensor, write_tensor};
use attnmem_core::{FeatureTensor, Float, Grid, LabelGrid, Tensor, TextTokens};
use serde::Serialize;

pub fn video_id(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .with_context(|| format!("no video id in {}", path.display()))
}

/// `.stmt` files of a directory by video id.
pub fn stmt_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "stmt") {
            out.insert(video_id(&p)?, p);
        }
    }
    Ok(out)
}

/// One file, or every `.stmt` file of a directory.
pub fn stmt_inputs(path: &Path) -> Result<BTreeMap<String, PathBuf>> {
    if path.is_dir() {
        stmt_files(path)
    } else {
        Ok(BTreeMap::from([(video_id(path)?, path.to_path_buf())]))
    }
}

pub fn load_features<F: Float>(dir: &Path) -> Result<BTreeMap<String, FeatureTensor<F>>> {
    let mut out = BTreeMap::new();
    for (id, p) in stmt_files(dir)? {
        let t = read_tensor(&p)?;
        out.insert(id, FeatureTensor::from_tensor(&t).with_context(|| format!("features {}", p.display()))?);
    }
    if out.is_empty() {
        bail!("no feature tensors in {}", dir.display());
    }
    Ok(out)
}

pub fn load_text<F: Float>(dir: Option<&Path>) -> Result<BTreeMap<String, TextTokens<F>>> {
    let Some(dir) = dir else { return Ok(BTreeMap::new()) };
    let mut out = BTreeMap::new();
    for (id, p) in stmt_files(dir)? {
        let t = read_tensor(&p)?;
        out.insert(id, TextTokens::from_tensor(&t).with_context(|| format!("caption tokens {}", p.display()))?);
    }
    Ok(out)
}

/// Frames of an `F x H x W` (or single `H x W`) real tensor.
pub fn read_frames(path: &Path) -> Result<Vec<Grid>> {
    let t = read_tensor(path)?;
    let values = t.to_f64_vec();
    let (frames, rows, cols) = match *t.shape() {
        [r, c] => (1, r, c),
        [f, r, c] => (f, r, c),
        ref s => bail!("{}: expected F x H x W maps, got shape {s:?}", path.display()),
    };
    Ok((0..frames).map(|f| Grid::new(rows, cols, values[f * rows * cols..(f + 1) * rows * cols].to_vec())).collect())
}

pub fn write_frames(frames: &[Grid], path: &Path) -> Result<()> {
    let (rows, cols) = frames.first().map_or((0, 0), Grid::dims);
    let mut values = Vec::with_capacity(frames.len() * rows * cols);
    for g in frames {
        if g.dims() != (rows, cols) {
            bail!("frames of {} differ in size", path.display());
        }
        values.extend_from_slice(g.values());
    }
    write_tensor(&Tensor::from_f64(vec![frames.len(), rows, cols], values)?, path)?;
    Ok(())
}

/// Frames of a `T x H x W` u16 label tensor.
pub fn read_label_frames(path: &Path) -> Result<Vec<LabelGrid>> {
    let t = read_tensor(path)?;
    let Some(values) = t.as_u16() else { bail!("{}: label maps must be u16", path.display()) };
    let (frames, rows, cols) = match *t.shape() {
        [r, c] => (1, r, c),
        [f, r, c] => (f, r, c),
        ref s => bail!("{}: expected T x H x W labels, got shape {s:?}", path.display()),
    };
    Ok((0..frames).map(|f| LabelGrid::new(rows, cols, values[f * rows * cols..(f + 1) * rows * cols].to_vec())).collect())
}

/// Canonical JSON to `out`, or to stdout.
pub fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            attnmem_core::io::json::write_json(value, p)?;
        }
        None => println!("{}", attnmem_core::io::json::to_canonical_string(value)?),
    }
    Ok(())
}
