//! `attnmem` command-line front end.
//!
//! Every subcommand writes a manifest (arguments, seed, SHA-256 of every
//! input) before it starts computing, then emits canonical JSON with floats
//! rounded to nine significant digits.

pub mod args;
pub mod commands;
pub mod data;
pub mod fixtures;
pub mod manifest;
pub mod verify;

use std::ffi::OsString;
use std::fmt;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Bad flag values found after parsing; exits like a clap usage error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `argv` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<i32> {
    let threads = match (cli.threads, &cli.command) {
        (Some(0), _) => return Err(usage("--threads must be at least 1")),
        (Some(n), _) => n,
        (None, Command::Train(_)) => 1,
        (None, _) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let ctx = commands::Context { verbose: cli.verbose, threads, manifest: cli.manifest.clone() };
    pool.install(|| commands::execute(&cli.command, &ctx))
}
