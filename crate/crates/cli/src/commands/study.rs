use std::fs;

use anyhow::{Context as _, Result};
use attnmem_core::io::load_scores;
use attnmem_core::study::{
    generate_sequence, refine_and_categorize, select_videos, validate_sequence, CategoryCounts, PresentationSequence,
    SelectionPlan,
};
use serde::Serialize;

use super::Context;
use crate::args::{SelectArgs, SequenceArgs};
use crate::data::{emit, load_features};
use crate::{usage, EXIT_DOMAIN, EXIT_OK};

pub fn select(name: &str, a: &SelectArgs, ctx: &Context) -> Result<i32> {
    if a.clusters == 0 || a.bins == 0 || a.target == 0 {
        return Err(usage("--clusters, --bins and --target must be positive"));
    }
    ctx.record(name, a, &[&a.features, &a.scores], a.out.as_deref(), false)?;
    let records = load_scores(&a.scores)?;
    let features = load_features::<f64>(&a.features)?;
    let pooled: Vec<(String, Vec<f64>)> = features.iter().map(|(id, f)| (id.clone(), f.mean_pooled())).collect();
    let pool = select_videos(&pooled, &records, a.clusters, a.bins, a.target, a.bin_mode.into(), a.seed)?;
    let plan = if a.no_refine {
        pool
    } else {
        let counts = CategoryCounts { targets: a.targets, vigilance: a.vigilance, fillers: a.fillers };
        refine_and_categorize(&pool, counts, a.seed)?
    };
    emit(&plan, a.out.as_deref())?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SequenceOutput {
    n_slots: usize,
    sequence: PresentationSequence,
}

pub fn sequence(name: &str, a: &SequenceArgs, ctx: &Context) -> Result<i32> {
    if let Some(check) = &a.check {
        ctx.record(name, a, &[check], a.out.as_deref(), false)?;
        let text = fs::read_to_string(check).with_context(|| format!("reading {}", check.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        // accept either a bare sequence or this command's own output
        let seq: PresentationSequence = serde_json::from_value(value.get("sequence").cloned().unwrap_or(value))?;
        let violations = validate_sequence(&seq);
        emit(&violations, a.out.as_deref())?;
        return Ok(if violations.is_empty() { EXIT_OK } else { EXIT_DOMAIN });
    }
    let plan_path = a.plan.as_ref().ok_or_else(|| usage("--plan or --check is required"))?;
    if a.max_attempts == 0 {
        return Err(usage("--max-attempts must be positive"));
    }
    ctx.record(name, a, &[plan_path], a.out.as_deref(), false)?;
    let text = fs::read_to_string(plan_path).with_context(|| format!("reading {}", plan_path.display()))?;
    let plan: SelectionPlan = serde_json::from_str(&text)?;
    let sequence = generate_sequence(&plan, a.seed, a.max_attempts)?;
    emit(&SequenceOutput { n_slots: sequence.slots.len(), sequence }, a.out.as_deref())?;
    Ok(EXIT_OK)
}
