use std::collections::BTreeMap;

use attnmem_core::study::{
    generate_sequence, kmeans, validate_sequence, Category, PlannedVideo, PresentationSequence, SelectionPlan,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{ensure, Outcome};

pub fn study_plan(targets: usize, vigilance: usize, fillers: usize) -> SelectionPlan {
    let mk = |prefix: &'static str, n: usize, c: Category| {
        (0..n).map(move |i| PlannedVideo { video_id: format!("{prefix}{i:03}"), cluster: 0, bin: 0, category: Some(c) })
    };
    SelectionPlan {
        videos: mk("t", targets, Category::Target)
            .chain(mk("v", vigilance, Category::Vigilance))
            .chain(mk("f", fillers, Category::Filler))
            .collect(),
    }
}

/// Constraint check written against the slot list only.
fn independent_check(seq: &PresentationSequence, plan: &SelectionPlan) -> Result<(), String> {
    let mut at: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in seq.slots.iter().enumerate() {
        at.entry(&s.video_id).or_default().push(i);
    }
    for v in &plan.videos {
        let pos = at.get(v.video_id.as_str()).ok_or_else(|| format!("{} never shown", v.video_id))?;
        let ok = match v.category.expect("categorized") {
            Category::Filler => pos.len() == 1,
            Category::Vigilance => pos.len() == 2 && (2..=3).contains(&(pos[1] - pos[0])),
            Category::Target => pos.len() == 2 && pos[1] - pos[0] >= 9,
        };
        if !ok {
            return Err(format!("{} shown at {pos:?}", v.video_id));
        }
    }
    if at.len() != plan.videos.len() {
        return Err("sequence shows videos outside the plan".into());
    }
    Ok(())
}

fn sequences() -> Result<String, String> {
    let plan = study_plan(20, 40, 80);
    let failures: Vec<String> = (0..1000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let seq = match generate_sequence(&plan, seed, 10_000) {
                Ok(s) => s,
                Err(e) => return Some(format!("seed {seed}: {e}")),
            };
            if seq.slots.len() != 200 {
                return Some(format!("seed {seed}: {} slots", seq.slots.len()));
            }
            if let Some(v) = validate_sequence(&seq).first() {
                return Some(format!("seed {seed}: slot {} {}", v.slot, v.message));
            }
            independent_check(&seq, &plan).err().map(|e| format!("seed {seed}: {e}"))
        })
        .collect();
    ensure(failures.is_empty(), || failures[0].clone())?;
    Ok("1000 sequences of 200 slots valid".into())
}

/// Returns points and their true blob, blob centers kept at least 30 apart.
pub fn blobs(k: usize, per: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::new();
    while centers.len() < k {
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..100.0)).collect();
        let far = centers.iter().all(|o| o.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() >= 900.0);
        if far {
            centers.push(c);
        }
    }
    let noise = Normal::new(0.0, 0.2).expect("valid sd");
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..per {
            points.push(c.iter().map(|x| x + noise.sample(&mut rng)).collect());
            truth.push(b);
        }
    }
    (points, truth)
}

fn clustering() -> Result<String, String> {
    let (points, truth) = blobs(28, 20, 8, 12);
    let result = kmeans(&points, 28, 3).map_err(|e| e.to_string())?;
    // purity: every found cluster is one blob, and every blob one cluster
    let mut pairs: BTreeMap<usize, usize> = BTreeMap::new();
    for (&c, &t) in result.assignments.iter().zip(&truth) {
        if *pairs.entry(c).or_insert(t) != t {
            return Err(format!("cluster {c} mixes blobs"));
        }
    }
    ensure(pairs.len() == 28, || format!("{} clusters used", pairs.len()))?;
    Ok("k-means purity 1.0 on 28 blobs".into())
}

pub fn study_tooling() -> Outcome {
    let a = sequences()?;
    let b = clustering()?;
    Ok(format!("{a}; {b}"))
}
