use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use attnmem_core::analysis::{
    assign_groups, group_memorability_distributions, label_presence, quantile_label_frequencies,
    stuff_things_cumulative, Group, GroupAssignment, GroupDistributions, StuffThings, WeightedLabelDistribution,
};
use attnmem_core::analysis::weighted_label_distribution;
use attnmem_core::io::{load_label_table, load_scores};
use attnmem_core::{Grid, LabelGrid};
use serde::Serialize;

use super::Context;
use crate::args::PanopticArgs;
use crate::data::{emit, read_frames, read_label_frames, stmt_files};
use crate::{usage, EXIT_OK};

#[derive(Serialize)]
struct PanopticReport {
    distribution: WeightedLabelDistribution,
    groups: GroupAssignment,
    attention_groups: GroupDistributions,
    gaze_groups: Option<GroupDistributions>,
    /// Per label, share of its videos in each memorability quantile.
    quantile_frequencies: BTreeMap<u16, Vec<f64>>,
    stuff_things: StuffThings,
    presence: BTreeMap<String, BTreeSet<u16>>,
}

fn group_name(g: Group) -> &'static str {
    match g {
        Group::G1 => "G1",
        Group::G2 => "G2",
        Group::G3 => "G3",
        Group::Ungrouped => "ungrouped",
    }
}

fn write_csv(path: &Path, dist: &WeightedLabelDistribution, groups: &GroupAssignment) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "label_id", "name", "is_thing", "pixel_prob", "attn_prob", "gaze_prob", "attn_ratio", "gaze_ratio", "attn_group",
        "gaze_group",
    ])?;
    let num = |x: f64| format!("{}", attnmem_core::io::json::round_sig9(x));
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for l in &dist.labels {
        w.write_record([
            l.label_id.to_string(),
            l.name.clone(),
            l.is_thing.to_string(),
            num(l.pixel_prob),
            num(l.attn_prob),
            num(l.gaze_prob),
            opt(l.attn_ratio),
            opt(l.gaze_ratio),
            group_name(groups.attention[&l.label_id]).to_string(),
            group_name(groups.gaze[&l.label_id]).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn panoptic(name: &str, a: &PanopticArgs, ctx: &Context) -> Result<i32> {
    if !(0.0..=1.0).contains(&a.presence) || a.quantiles == 0 {
        return Err(usage("--presence must lie in [0, 1] and --quantiles be positive"));
    }
    let mut inputs: Vec<&Path> = vec![&a.labels, &a.attn, &a.label_table, &a.scores];
    inputs.extend(a.gaze.as_deref());
    ctx.record(name, a, &inputs, a.out.as_deref(), false)?;
    let table = load_label_table(&a.label_table)?;
    let records = load_scores(&a.scores)?;
    let label_files = stmt_files(&a.labels)?;
    let attn_files = stmt_files(&a.attn)?;
    let gaze_files = a.gaze.as_deref().map(stmt_files).transpose()?;

    let (mut labels, mut attention, mut gaze): (Vec<LabelGrid>, Vec<Grid>, Vec<Grid>) = (vec![], vec![], vec![]);
    let mut presence = BTreeMap::new();
    for (id, path) in &label_files {
        let Some(attn_path) = attn_files.get(id) else {
            ctx.note(format!("{id}: no attention maps, skipped"));
            continue;
        };
        let l = read_label_frames(path)?;
        let at = read_frames(attn_path)?;
        if l.len() != at.len() {
            bail!("{id}: {} label frames vs {} attention frames", l.len(), at.len());
        }
        if let Some(files) = &gaze_files {
            let g = read_frames(files.get(id).with_context(|| format!("no gaze maps for {id}"))?)?;
            if g.len() != at.len() {
                bail!("{id}: {} gaze frames vs {} attention frames", g.len(), at.len());
            }
            gaze.extend(g);
        }
        presence.insert(id.clone(), label_presence(&l, a.presence));
        labels.extend(l);
        attention.extend(at);
    }
    if presence.is_empty() {
        bail!("no video has both label and attention maps");
    }
    let dist = weighted_label_distribution(&labels, &attention, gaze_files.is_some().then_some(gaze.as_slice()), &table)?;
    let groups = assign_groups(&dist);
    let attention_groups = group_memorability_distributions(&groups.attention, &presence, &records, &table)?;
    let gaze_groups = dist
        .has_gaze
        .then(|| group_memorability_distributions(&groups.gaze, &presence, &records, &table))
        .transpose()?;
    let present: Vec<u16> = presence.values().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let quantile_frequencies = quantile_label_frequencies(&presence, &records, &present, a.quantiles)?;
    if let Some(path) = &a.csv {
        write_csv(path, &dist, &groups)?;
    }
    let report = PanopticReport {
        stuff_things: stuff_things_cumulative(&dist),
        distribution: dist,
        groups,
        attention_groups,
        gaze_groups,
        quantile_frequencies,
        presence,
    };
    emit(&report, a.out.as_deref())?;
    Ok(EXIT_OK)
}
