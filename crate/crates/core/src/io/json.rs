//! JSON output helpers. Every float written by the analysis stages is rounded
//! to 9 significant digits and object keys are sorted, so identical runs diff clean.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::IoError;

/// Rounds `x` to 9 significant digits. Non-finite values pass through.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Rounds every float in `value` in place.
pub fn canonicalize(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig9(f)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

pub fn to_canonical_value<T: Serialize>(item: &T) -> Result<Value, IoError> {
    let mut v = serde_json::to_value(item)?;
    canonicalize(&mut v);
    Ok(v)
}

pub fn to_canonical_string<T: Serialize>(item: &T) -> Result<String, IoError> {
    let v = to_canonical_value(item)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(item: &T, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
        }
    }
    fs::write(path, to_canonical_string(item)?).map_err(|e| IoError::io(path, e))
}

/// Appends one canonical JSON line per item.
pub fn write_json_lines<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&to_canonical_value(item)?)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| IoError::io(path, e))
}
