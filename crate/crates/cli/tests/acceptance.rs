//! Acceptance gate: one pass/fail line per criterion, nonzero exit on any failure.

use std::process::{Command, ExitCode};
use std::time::Instant;

use attnmem_cli::verify::{find, run_criterion};

fn verify_command() -> (bool, String, f64) {
    let dir = tempfile::tempdir().expect("tempdir");
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_attnmem"))
        .arg("verify")
        .current_dir(dir.path())
        .output()
        .expect("spawn attnmem");
    let seconds = start.elapsed().as_secs_f64();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines = stdout.lines().filter(|l| l.starts_with("criterion")).count();
    let manifest = dir.path().join("attnmem.manifest.json").is_file();
    let passed = out.status.code() == Some(0) && seconds < 900.0 && lines == 10 && manifest;
    let detail = format!("exit {:?}, {lines} criterion lines, manifest written: {manifest}", out.status.code());
    (passed, detail, seconds)
}

fn main() -> ExitCode {
    let mut all = true;
    for id in 1..=9u8 {
        let r = run_criterion(find(id).expect("criterion is registered"));
        println!("{}", r.line());
        all &= r.passed;
    }
    let (passed, detail, seconds) = verify_command();
    println!(
        "criterion 10 {:<42} {} ({seconds:.1} s): {detail}",
        "attnmem verify",
        if passed { "PASS" } else { "FAIL" }
    );
    all &= passed;
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
