use std::collections::{BTreeMap, BTreeSet};

use attnmem_core::analysis::{
    assign_groups, group_memorability_distributions, label_presence, weighted_label_distribution, Category, Group,
    KsOutcome, PRESENCE_FRACTION,
};
use attnmem_core::metrics::ks_two_sample;
use attnmem_core::{Grid, LabelEntry, LabelGrid, LabelTable, MemRecord, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::oracles;
use super::{ensure, Outcome};

/// Sixteen videos with two frames each. Videos 0-7 put a thing (1) in the
/// top-left quadrant, fully attended, over unattended stuff (5). Videos
/// 8-15 split into stuff (3) on top and things (4, 6) below under uniform
/// attention. Label 2 never appears.
pub struct PanopticWorld {
    pub table: LabelTable,
    pub videos: Vec<String>,
    pub labels: Vec<LabelGrid>,
    pub attention: Vec<Grid>,
    pub gaze: Vec<Grid>,
    pub records: Vec<MemRecord>,
    pub frames_per_video: usize,
}

pub fn panoptic_world() -> PanopticWorld {
    let entry = |id: u16, name: &str, is_thing: bool| LabelEntry { label_id: id, name: name.into(), is_thing };
    let table = LabelTable::new(vec![
        entry(1, "person", true),
        entry(2, "boat", true),
        entry(3, "sky", false),
        entry(4, "dog", true),
        entry(5, "wall", false),
        entry(6, "car", true),
    ])
    .expect("distinct ids");
    let frames_per_video = 2;
    let (mut videos, mut labels, mut attention, mut gaze, mut records) = (vec![], vec![], vec![], vec![], vec![]);
    for v in 0..16usize {
        let id = format!("w{v:02}");
        let planted = v < 8;
        for _ in 0..frames_per_video {
            let (label, att) = if planted {
                (
                    LabelGrid::from_fn(16, 16, |r, c| if r < 8 && c < 8 { 1 } else { 5 }),
                    Grid::from_fn(32, 32, |r, c| if r < 16 && c < 16 { 1.0 } else { 0.0 }),
                )
            } else {
                (
                    LabelGrid::from_fn(16, 16, |r, c| match (r < 8, c < 8) {
                        (true, _) => 3,
                        (false, true) => 4,
                        (false, false) => 6,
                    }),
                    Grid::filled(32, 32, 0.25),
                )
            };
            gaze.push(att.map(|x| 3.0 * x));
            labels.push(label);
            attention.push(att);
        }
        // planted videos are the memorable ones
        let score = if planted { 0.6 + 0.025 * v as f64 } else { 0.3 + 0.025 * (v - 8) as f64 };
        records.push(MemRecord { video_id: id.clone(), score, split: Split::Train });
        videos.push(id);
    }
    PanopticWorld { table, videos, labels, attention, gaze, records, frames_per_video }
}

pub fn panoptic_world_check() -> Outcome {
    let w = panoptic_world();
    let dist = weighted_label_distribution(&w.labels, &w.attention, Some(&w.gaze), &w.table).map_err(|e| e.to_string())?;
    for (what, total) in [
        ("pixel", dist.labels.iter().map(|l| l.pixel_prob).sum::<f64>()),
        ("attention", dist.labels.iter().map(|l| l.attn_prob).sum::<f64>()),
        ("gaze", dist.labels.iter().map(|l| l.gaze_prob).sum::<f64>()),
    ] {
        ensure((total - 1.0).abs() <= 1e-9, || format!("{what} probabilities sum to {total}"))?;
    }
    // hand-derived: 1 gets half the attention on an eighth of the pixels
    let expected_ratio: BTreeMap<u16, Option<f64>> =
        [(1, Some(4.0)), (2, None), (3, Some(1.0)), (4, Some(1.0)), (5, Some(0.0)), (6, Some(1.0))].into();
    for l in &dist.labels {
        let want = expected_ratio[&l.label_id];
        let close = |got: Option<f64>| match (got, want) {
            (Some(g), Some(e)) => (g - e).abs() <= 1e-9,
            (None, None) => true,
            _ => false,
        };
        ensure(close(l.attn_ratio) && close(l.gaze_ratio), || {
            format!("label {}: ratios {:?}/{:?}, expected {want:?}", l.label_id, l.attn_ratio, l.gaze_ratio)
        })?;
    }
    let groups = assign_groups(&dist);
    let expected: BTreeMap<u16, Group> = [
        (1, Group::G1),
        (2, Group::Ungrouped),
        (3, Group::G2),
        (4, Group::G2),
        (5, Group::G3),
        (6, Group::G2),
    ]
    .into();
    ensure(groups.attention == expected, || format!("attention groups {:?}", groups.attention))?;
    ensure(groups.gaze == expected, || format!("gaze groups {:?}", groups.gaze))?;

    let presence: BTreeMap<String, BTreeSet<u16>> = w
        .videos
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let frames = &w.labels[i * w.frames_per_video..(i + 1) * w.frames_per_video];
            (id.clone(), label_presence(frames, PRESENCE_FRACTION))
        })
        .collect();
    let dists = group_memorability_distributions(&groups.attention, &presence, &w.records, &w.table)
        .map_err(|e| e.to_string())?;
    let all = dists.categories.iter().find(|c| c.category == Category::All).ok_or("no All category")?;
    let p = match all.g1_vs_g2 {
        KsOutcome::Tested { p, .. } => p,
        ref other => return Err(format!("G1 vs G2 not tested: {other:?}")),
    };
    ensure(p < 0.01, || format!("KS G1 vs G2 p = {p}"))?;
    ensure(all.scores[&Group::G2].len() == 24, || "G2 should hold 8 videos once per label".into())?;
    Ok(format!("groups recovered for attention and gaze; KS G1 vs G2 p = {p:.2e}"))
}

pub fn ks_against_permutations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cases: Vec<(Vec<f64>, Vec<f64>, u64)> = (0..20)
        .map(|k| {
            let (na, nb) = (rng.random_range(4..=10), rng.random_range(4..=10));
            let shift = rng.random_range(0.0..1.5);
            let a = (0..na).map(|_| rng.random::<f64>()).collect();
            let b = (0..nb).map(|_| rng.random::<f64>() + shift * rng.random::<f64>()).collect();
            (a, b, 100 + k)
        })
        .collect();
    let rows: Vec<Result<(f64, f64), String>> = cases
        .par_iter()
        .map(|(a, b, seed)| {
            let core = ks_two_sample(a, b).map_err(|e| e.to_string())?;
            let d = oracles::ks_d(a, b);
            if (core.d - d).abs() > 1e-12 {
                return Err(format!("D {} vs ECDF oracle {d}", core.d));
            }
            let mut r = ChaCha8Rng::seed_from_u64(*seed);
            let p = oracles::ks_permutation_p(a, b, 100_000, &mut r);
            Ok((core.p, p))
        })
        .collect();
    let mut worst = 0.0f64;
    for r in rows {
        let (core, oracle) = r?;
        worst = worst.max((core - oracle).abs());
    }
    ensure(worst <= 0.02, || format!("p-value off resampling oracle by {worst:.4}"))?;
    Ok(format!("20 pairs, worst |p - p_resampled| = {worst:.4}"))
}
