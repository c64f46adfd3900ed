use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::io::{LabelTable, MemRecord};
use crate::metrics::{ks_two_sample, KsResult};
use crate::raster::{Grid, LabelGrid};

/// A label is present in a video when it owns at least this share of the
/// pixels of some frame.
pub const PRESENCE_FRACTION: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub label_id: u16,
    pub name: String,
    pub is_thing: bool,
    pub pixel_prob: f64,
    pub attn_prob: f64,
    /// Zero everywhere when no gaze maps were supplied.
    pub gaze_prob: f64,
    /// `attn_prob / pixel_prob`; absent when the label has no pixels.
    pub attn_ratio: Option<f64>,
    pub gaze_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedLabelDistribution {
    /// Every label of the table, by id.
    pub labels: Vec<LabelStats>,
    pub has_gaze: bool,
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
}

/// Pixel counts and saliency-weighted pixel counts per label, accumulated
/// over all given frames and normalized to distributions over labels.
/// Label maps are resized (nearest neighbor) to the saliency raster.
pub fn weighted_label_distribution(
    label_maps: &[LabelGrid],
    attention: &[Grid],
    gaze: Option<&[Grid]>,
    table: &LabelTable,
) -> Result<WeightedLabelDistribution, AnalysisError> {
    if label_maps.len() != attention.len() || gaze.is_some_and(|g| g.len() != attention.len()) {
        return Err(AnalysisError::EmptyInput("label, attention and gaze frame counts differ"));
    }
    if label_maps.is_empty() {
        return Err(AnalysisError::EmptyInput("no frames"));
    }
    let index: BTreeMap<u16, usize> = table.entries.iter().enumerate().map(|(i, e)| (e.label_id, i)).collect();
    let n = table.entries.len();
    let (mut pixels, mut attn, mut gz) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (f, (labels, a)) in label_maps.iter().zip(attention).enumerate() {
        let g = gaze.map(|g| &g[f]);
        if let Some(g) = g {
            if g.dims() != a.dims() {
                return Err(AnalysisError::RasterMismatch { expected: a.dims(), got: g.dims() });
            }
        }
        let (rows, cols) = a.dims();
        let resized;
        let labels = if labels.dims() == (rows, cols) {
            labels
        } else {
            resized = labels.resize_nearest(rows, cols);
            &resized
        };
        for (p, &id) in labels.values().iter().enumerate() {
            let &k = index.get(&id).ok_or(AnalysisError::UnknownLabelId(id))?;
            pixels[k] += 1.0;
            attn[k] += a.values()[p];
            if let Some(g) = g {
                gz[k] += g.values()[p];
            }
        }
    }
    normalize(&mut pixels);
    normalize(&mut attn);
    normalize(&mut gz);
    let labels = table
        .entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let ratio = |p: f64| (pixels[k] > 0.0).then(|| p / pixels[k]);
            LabelStats {
                label_id: e.label_id,
                name: e.name.clone(),
                is_thing: e.is_thing,
                pixel_prob: pixels[k],
                attn_prob: attn[k],
                gaze_prob: gz[k],
                attn_ratio: ratio(attn[k]),
                gaze_ratio: gaze.and(ratio(gz[k])),
            }
        })
        .collect();
    Ok(WeightedLabelDistribution { labels, has_gaze: gaze.is_some() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Ratio above 1.5.
    G1,
    /// Ratio within [0.8, 1.2].
    G2,
    /// Ratio below 0.5.
    G3,
    Ungrouped,
}

pub fn group_for_ratio(ratio: Option<f64>) -> Group {
    match ratio {
        Some(r) if r > 1.5 => Group::G1,
        Some(r) if (0.8..=1.2).contains(&r) => Group::G2,
        Some(r) if r < 0.5 => Group::G3,
        _ => Group::Ungrouped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub attention: BTreeMap<u16, Group>,
    pub gaze: BTreeMap<u16, Group>,
}

pub fn assign_groups(dist: &WeightedLabelDistribution) -> GroupAssignment {
    GroupAssignment {
        attention: dist.labels.iter().map(|l| (l.label_id, group_for_ratio(l.attn_ratio))).collect(),
        gaze: dist.labels.iter().map(|l| (l.label_id, group_for_ratio(l.gaze_ratio))).collect(),
    }
}

/// Labels owning at least `fraction` of some frame's pixels.
pub fn label_presence(label_maps: &[LabelGrid], fraction: f64) -> BTreeSet<u16> {
    let mut present = BTreeSet::new();
    for m in label_maps {
        let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
        for &id in m.values() {
            *counts.entry(id).or_default() += 1;
        }
        let need = fraction * m.values().len() as f64;
        present.extend(counts.into_iter().filter(|&(_, c)| c as f64 >= need).map(|(id, _)| id));
    }
    present
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Stuff,
    Things,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum KsOutcome {
    Tested { d: f64, p: f64 },
    /// One side had fewer than two scores.
    EmptyGroup { groups: Vec<Group> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryGroups {
    pub category: Category,
    /// Scores of videos containing each label of the group, once per label.
    pub scores: BTreeMap<Group, Vec<f64>>,
    pub g1_vs_g2: KsOutcome,
    pub g3_vs_g2: KsOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistributions {
    pub categories: Vec<CategoryGroups>,
}

fn ks_outcome(scores: &BTreeMap<Group, Vec<f64>>, a: Group, b: Group) -> KsOutcome {
    let empty: Vec<Group> = [a, b].into_iter().filter(|g| scores[g].len() < 2).collect();
    if !empty.is_empty() {
        return KsOutcome::EmptyGroup { groups: empty };
    }
    let KsResult { d, p } = ks_two_sample(&scores[&a], &scores[&b]).expect("both sides have two scores");
    KsOutcome::Tested { d, p }
}

/// Memorability scores behind each label group, for stuff, things and all
/// labels, with KS tests of G1 and G3 against G2.
pub fn group_memorability_distributions(
    groups: &BTreeMap<u16, Group>,
    presence: &BTreeMap<String, BTreeSet<u16>>,
    records: &[MemRecord],
    table: &LabelTable,
) -> Result<GroupDistributions, AnalysisError> {
    let scores: BTreeMap<&str, f64> = records.iter().map(|r| (r.video_id.as_str(), r.score)).collect();
    let mut categories = Vec::new();
    for category in [Category::Stuff, Category::Things, Category::All] {
        let mut by_group: BTreeMap<Group, Vec<f64>> = [Group::G1, Group::G2, Group::G3].into_iter().map(|g| (g, vec![])).collect();
        for (&label, &group) in groups {
            if group == Group::Ungrouped {
                continue;
            }
            let is_thing = table.is_thing(label).ok_or(AnalysisError::UnknownLabelId(label))?;
            let keep = match category {
                Category::Stuff => !is_thing,
                Category::Things => is_thing,
                Category::All => true,
            };
            if !keep {
                continue;
            }
            for (video, labels) in presence {
                if labels.contains(&label) {
                    let &s = scores.get(video.as_str()).ok_or_else(|| AnalysisError::MissingScore(video.clone()))?;
                    by_group.get_mut(&group).expect("grouped").push(s);
                }
            }
        }
        let g1_vs_g2 = ks_outcome(&by_group, Group::G1, Group::G2);
        let g3_vs_g2 = ks_outcome(&by_group, Group::G3, Group::G2);
        categories.push(CategoryGroups { category, scores: by_group, g1_vs_g2, g3_vs_g2 });
    }
    Ok(GroupDistributions { categories })
}

/// For each requested label, the share of its containing videos falling in
/// each memorability quantile bin (bins as in `bin_by_memorability`).
pub fn quantile_label_frequencies(
    presence: &BTreeMap<String, BTreeSet<u16>>,
    records: &[MemRecord],
    labels: &[u16],
    n_quantiles: usize,
) -> Result<BTreeMap<u16, Vec<f64>>, AnalysisError> {
    if presence.len() < n_quantiles.max(1) {
        return Err(AnalysisError::TooFewVideos { need: n_quantiles.max(1), got: presence.len() });
    }
    let scores: BTreeMap<&str, f64> = records.iter().map(|r| (r.video_id.as_str(), r.score)).collect();
    let mut rows = Vec::with_capacity(presence.len());
    for (video, set) in presence {
        let &s = scores.get(video.as_str()).ok_or_else(|| AnalysisError::MissingScore(video.clone()))?;
        rows.push((s, video.as_str(), set));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    let n = rows.len();
    let mut out = BTreeMap::new();
    for &label in labels {
        let mut counts: Vec<f64> = (0..n_quantiles)
            .map(|b| rows[b * n / n_quantiles..(b + 1) * n / n_quantiles].iter().filter(|r| r.2.contains(&label)).count() as f64)
            .collect();
        if counts.iter().all(|&c| c == 0.0) {
            return Err(AnalysisError::LabelAbsent(label));
        }
        normalize(&mut counts);
        out.insert(label, counts);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShareTriple {
    pub pixel: f64,
    pub attn: f64,
    pub gaze: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StuffThings {
    pub stuff: ShareTriple,
    pub things: ShareTriple,
}

/// Probability mass of stuff labels versus thing labels.
pub fn stuff_things_cumulative(dist: &WeightedLabelDistribution) -> StuffThings {
    let mut st = StuffThings {
        stuff: ShareTriple { pixel: 0.0, attn: 0.0, gaze: 0.0 },
        things: ShareTriple { pixel: 0.0, attn: 0.0, gaze: 0.0 },
    };
    for l in &dist.labels {
        let t = if l.is_thing { &mut st.things } else { &mut st.stuff };
        t.pixel += l.pixel_prob;
        t.attn += l.attn_prob;
        t.gaze += l.gaze_prob;
    }
    st
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{LabelEntry, Split};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table() -> LabelTable {
        LabelTable::new(vec![
            LabelEntry { label_id: 1, name: "sky".into(), is_thing: false },
            LabelEntry { label_id: 2, name: "person".into(), is_thing: true },
            LabelEntry { label_id: 7, name: "road".into(), is_thing: false },
        ])
        .unwrap()
    }

    #[test]
    fn single_label_world() {
        let labels = vec![LabelGrid::new(4, 4, vec![2; 16])];
        let att = vec![Grid::from_fn(4, 4, |r, c| (r + c) as f64)];
        let d = weighted_label_distribution(&labels, &att, None, &table()).unwrap();
        let person = d.labels.iter().find(|l| l.label_id == 2).unwrap();
        assert_eq!((person.pixel_prob, person.attn_prob), (1.0, 1.0));
        assert_eq!(d.labels[0].attn_ratio, None);
        let st = stuff_things_cumulative(&d);
        assert_eq!(st.things.pixel, 1.0);
        assert_eq!(st.stuff.attn, 0.0);
    }

    #[test]
    fn half_split_uniform_saliency() {
        let labels = vec![LabelGrid::from_fn(4, 4, |_, c| if c < 2 { 1 } else { 7 })];
        let att = vec![Grid::filled(4, 4, 0.3)];
        let gaze = vec![Grid::filled(4, 4, 1.0)];
        let d = weighted_label_distribution(&labels, &att, Some(&gaze), &table()).unwrap();
        for id in [1, 7] {
            let l = d.labels.iter().find(|l| l.label_id == id).unwrap();
            assert_eq!((l.pixel_prob, l.attn_prob, l.gaze_prob), (0.5, 0.5, 0.5));
            assert_eq!((l.attn_ratio, l.gaze_ratio), (Some(1.0), Some(1.0)));
        }
        let st = stuff_things_cumulative(&d);
        assert_eq!((st.stuff.pixel, st.stuff.attn), (1.0, 1.0));
    }

    #[test]
    fn matches_pixel_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ids = [1u16, 2, 7];
        let labels: Vec<LabelGrid> = (0..2).map(|_| LabelGrid::from_fn(8, 8, |_, _| ids[rng.random_range(0..3)])).collect();
        let att: Vec<Grid> = (0..2).map(|_| Grid::from_fn(8, 8, |_, _| rng.random())).collect();
        let d = weighted_label_distribution(&labels, &att, None, &table()).unwrap();
        let (mut px, mut at) = (BTreeMap::new(), BTreeMap::new());
        let (mut tp, mut ta) = (0.0, 0.0);
        for f in 0..2 {
            for r in 0..8 {
                for c in 0..8 {
                    let id = labels[f].get(r, c);
                    *px.entry(id).or_insert(0.0) += 1.0;
                    *at.entry(id).or_insert(0.0) += att[f].get(r, c);
                    tp += 1.0;
                    ta += att[f].get(r, c);
                }
            }
        }
        for l in &d.labels {
            assert!((l.pixel_prob - px.get(&l.label_id).copied().unwrap_or(0.0) / tp).abs() < 1e-12);
            assert!((l.attn_prob - at.get(&l.label_id).copied().unwrap_or(0.0) / ta).abs() < 1e-12);
        }
        let total: f64 = d.labels.iter().map(|l| l.attn_prob).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn labels_resized_to_saliency_raster_and_unknown_rejected() {
        let labels = vec![LabelGrid::from_fn(2, 2, |r, _| if r == 0 { 1 } else { 2 })];
        let att = vec![Grid::filled(8, 8, 1.0)];
        let d = weighted_label_distribution(&labels, &att, None, &table()).unwrap();
        assert_eq!(d.labels[0].pixel_prob, 0.5);
        let bad = vec![LabelGrid::new(2, 2, vec![9; 4])];
        assert!(matches!(
            weighted_label_distribution(&bad, &att, None, &table()),
            Err(AnalysisError::UnknownLabelId(9))
        ));
    }

    #[test]
    fn group_thresholds() {
        assert_eq!(group_for_ratio(Some(1.0)), Group::G2);
        assert_eq!(group_for_ratio(Some(1.6)), Group::G1);
        assert_eq!(group_for_ratio(Some(0.49)), Group::G3);
        assert_eq!(group_for_ratio(Some(0.65)), Group::Ungrouped);
        assert_eq!(group_for_ratio(Some(1.5)), Group::Ungrouped);
        assert_eq!(group_for_ratio(Some(0.8)), Group::G2);
        assert_eq!(group_for_ratio(Some(1.2)), Group::G2);
        assert_eq!(group_for_ratio(Some(0.5)), Group::Ungrouped);
        assert_eq!(group_for_ratio(None), Group::Ungrouped);
    }

    fn rec(id: &str, score: f64) -> MemRecord {
        MemRecord { video_id: id.into(), score, split: Split::Test }
    }

    #[test]
    fn all_g2_reports_empty_groups() {
        let groups = BTreeMap::from([(1, Group::G2), (2, Group::G2)]);
        let presence: BTreeMap<String, BTreeSet<u16>> =
            (0..6).map(|i| (format!("v{i}"), BTreeSet::from([1, 2]))).collect();
        let records: Vec<_> = (0..6).map(|i| rec(&format!("v{i}"), i as f64 / 10.0)).collect();
        let out = group_memorability_distributions(&groups, &presence, &records, &table()).unwrap();
        let all = &out.categories[2];
        assert_eq!(all.scores[&Group::G2].len(), 12);
        assert_eq!(all.g1_vs_g2, KsOutcome::EmptyGroup { groups: vec![Group::G1] });
        assert_eq!(all.g3_vs_g2, KsOutcome::EmptyGroup { groups: vec![Group::G3] });
    }

    #[test]
    fn identical_populations_give_high_p() {
        let groups = BTreeMap::from([(1, Group::G1), (7, Group::G2)]);
        let presence: BTreeMap<String, BTreeSet<u16>> =
            (0..10).map(|i| (format!("v{i}"), BTreeSet::from([1, 7]))).collect();
        let records: Vec<_> = (0..10).map(|i| rec(&format!("v{i}"), i as f64 / 10.0)).collect();
        let out = group_memorability_distributions(&groups, &presence, &records, &table()).unwrap();
        match &out.categories[0].g1_vs_g2 {
            KsOutcome::Tested { d, p } => assert!(*d == 0.0 && *p == 1.0),
            other => panic!("{other:?}"),
        }
        assert_eq!(out.categories[1].scores[&Group::G1].len(), 0);
    }

    #[test]
    fn quantile_frequencies() {
        let records: Vec<_> = (0..8).map(|i| rec(&format!("v{i}"), i as f64 / 8.0)).collect();
        let presence: BTreeMap<String, BTreeSet<u16>> = (0..8)
            .map(|i| {
                let mut s = BTreeSet::from([1]);
                if i >= 6 {
                    s.insert(2);
                }
                (format!("v{i}"), s)
            })
            .collect();
        let f = quantile_label_frequencies(&presence, &records, &[1, 2], 4).unwrap();
        assert_eq!(f[&1], vec![0.25; 4]);
        assert_eq!(f[&2], vec![0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(quantile_label_frequencies(&presence, &records, &[7], 4), Err(AnalysisError::LabelAbsent(7))));
    }

    #[test]
    fn presence_threshold() {
        let mut v = vec![1u16; 10_000];
        v[0] = 2;
        v[1..11].iter_mut().for_each(|x| *x = 7);
        let p = label_presence(&[LabelGrid::new(100, 100, v)], PRESENCE_FRACTION);
        assert_eq!(p, BTreeSet::from([1, 7]));
    }

    proptest! {
        #[test]
        fn groups_scale_free(seed in 0u64..200, k in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ids = [1u16, 2, 7];
            let labels = vec![LabelGrid::from_fn(6, 6, |_, _| ids[rng.random_range(0..3)])];
            let att = vec![Grid::from_fn(6, 6, |_, _| rng.random::<f64>())];
            let scaled = vec![att[0].map(|v| v * k)];
            let a = assign_groups(&weighted_label_distribution(&labels, &att, None, &table()).unwrap());
            let b = assign_groups(&weighted_label_distribution(&labels, &scaled, None, &table()).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn stuff_plus_things_is_one(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ids = [1u16, 2, 7];
            let labels = vec![LabelGrid::from_fn(5, 5, |_, _| ids[rng.random_range(0..3)])];
            let att = vec![Grid::from_fn(5, 5, |_, _| rng.random::<f64>() + 0.01)];
            let gaze = vec![Grid::from_fn(5, 5, |_, _| rng.random::<f64>() + 0.01)];
            let d = weighted_label_distribution(&labels, &att, Some(&gaze), &table()).unwrap();
            let st = stuff_things_cumulative(&d);
            prop_assert!((st.stuff.pixel + st.things.pixel - 1.0).abs() < 1e-9);
            prop_assert!((st.stuff.attn + st.things.attn - 1.0).abs() < 1e-9);
            prop_assert!((st.stuff.gaze + st.things.gaze - 1.0).abs() < 1e-9);
            // partition oracle
            let things: f64 = d.labels.iter().filter(|l| l.is_thing).map(|l| l.attn_prob).sum();
            prop_assert!((st.things.attn - things).abs() < 1e-15);
        }
    }
}
