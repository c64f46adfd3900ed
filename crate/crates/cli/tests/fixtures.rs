use std::fs;
use std::path::{Path, PathBuf};

use attnmem_cli::fixtures::write_toy;

fn shipped() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy")
}

fn files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            files(root, &p, out);
        } else {
            out.push(p.strip_prefix(root).unwrap().to_path_buf());
        }
    }
}

/// Set ATTNMEM_WRITE_FIXTURES=1 to rewrite the shipped copy.
#[test]
fn shipped_toy_fixtures_match_generator() {
    if std::env::var_os("ATTNMEM_WRITE_FIXTURES").is_some() {
        write_toy(&shipped()).unwrap();
    }
    let fresh = tempfile::tempdir().unwrap();
    write_toy(fresh.path()).unwrap();
    let mut names = Vec::new();
    files(fresh.path(), fresh.path(), &mut names);
    assert!(!names.is_empty());
    for name in &names {
        let a = fs::read(fresh.path().join(name)).unwrap();
        let b = fs::read(shipped().join(name)).unwrap_or_else(|_| panic!("fixture {} missing", name.display()));
        assert!(a == b, "fixture {} is stale", name.display());
    }
}
