mod gaze;
mod model;
mod panoptic;
mod study;

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

use crate::args::Command;
use crate::{manifest, EXIT_DOMAIN, EXIT_OK};

pub struct Context {
    pub verbose: u8,
    pub threads: usize,
    pub manifest: Option<PathBuf>,
}

impl Context {
    /// Writes the run manifest; called before any computation.
    pub(crate) fn record(&self, command: &str, args: &impl Serialize, inputs: &[&Path], out: Option<&Path>, out_is_dir: bool) -> Result<()> {
        let path = self.manifest.clone().unwrap_or_else(|| manifest::default_path(out, out_is_dir));
        manifest::write(&path, command, self.threads, args, inputs)?;
        Ok(())
    }

    pub(crate) fn note(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn execute(command: &Command, ctx: &Context) -> Result<i32> {
    let name = command.name();
    match command {
        Command::Train(a) => model::train(name, a, ctx),
        Command::Predict(a) => model::predict(name, a, ctx),
        Command::Attn(a) => model::attn(name, a, ctx),
        Command::Temporal(a) => model::temporal(name, a, ctx),
        Command::Nn(a) => model::nn(name, a, ctx),
        Command::Fixmap(a) => gaze::fixmap(name, a, ctx),
        Command::Metrics(a) => gaze::metrics(name, a, ctx),
        Command::AucPercentile(a) => gaze::percentile(name, a, ctx),
        Command::Panoptic(a) => panoptic::panoptic(name, a, ctx),
        Command::Select(a) => study::select(name, a, ctx),
        Command::Sequence(a) => study::sequence(name, a, ctx),
        Command::Verify(a) => {
            ctx.record(name, a, &[], a.out.as_deref(), false)?;
            let report = crate::verify::run_suite(&a.only, true);
            if let Some(out) = &a.out {
                crate::data::emit(&report, Some(out))?;
            }
            Ok(if report.all_passed() { EXIT_OK } else { EXIT_DOMAIN })
        }
    }
}
