use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::io::MemRecord;

/// Cosine similarity above which a validation video is flagged as a likely
/// near-duplicate of a training video.
pub const DEFAULT_LEAK_THRESHOLD: f64 = 0.97;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnAuditRow {
    pub val_video_id: String,
    pub neighbors: Vec<String>,
    /// Descending.
    pub similarities: Vec<f64>,
    pub neighbor_scores: Vec<f64>,
    pub mean_neighbor_score: f64,
    pub val_score: f64,
    pub val_predicted: Option<f64>,
    pub leakage_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnSummary {
    pub n_val: usize,
    pub flagged: usize,
    pub flagged_fraction: f64,
    /// Mean of `|val score - mean neighbor score|`.
    pub mean_abs_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnAudit {
    pub rows: Vec<NnAuditRow>,
    pub summary: NnSummary,
}

/// Zero when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// The `k` most cosine-similar training videos of every validation video.
/// Equal similarities keep training-id order.
pub fn nn_audit(
    train: &BTreeMap<String, Vec<f64>>,
    val: &BTreeMap<String, Vec<f64>>,
    records: &[MemRecord],
    predictions: Option<&BTreeMap<String, f64>>,
    k: usize,
    leak_threshold: f64,
) -> Result<NnAudit, AnalysisError> {
    let dim = train
        .values()
        .next()
        .ok_or(AnalysisError::EmptyInput("no training representations"))?
        .len();
    if let Some(v) = train.values().chain(val.values()).find(|v| v.len() != dim) {
        return Err(AnalysisError::DimMismatch { expected: dim, got: v.len() });
    }
    let scores: BTreeMap<&str, f64> = records.iter().map(|r| (r.video_id.as_str(), r.score)).collect();
    let score = |id: &str| scores.get(id).copied().ok_or_else(|| AnalysisError::MissingScore(id.to_string()));
    let k = k.min(train.len());

    let mut rows = Vec::with_capacity(val.len());
    for (vid, rep) in val {
        let mut sims: Vec<(f64, &String)> = train.iter().map(|(tid, t)| (cosine_similarity(rep, t), tid)).collect();
        sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        sims.truncate(k);
        let neighbor_scores = sims.iter().map(|(_, id)| score(id)).collect::<Result<Vec<_>, _>>()?;
        let mean_neighbor_score = neighbor_scores.iter().sum::<f64>() / k.max(1) as f64;
        rows.push(NnAuditRow {
            val_video_id: vid.clone(),
            neighbors: sims.iter().map(|(_, id)| (*id).clone()).collect(),
            leakage_flag: sims.first().is_some_and(|s| s.0 >= leak_threshold),
            similarities: sims.iter().map(|s| s.0).collect(),
            neighbor_scores,
            mean_neighbor_score,
            val_score: score(vid)?,
            val_predicted: predictions.and_then(|p| p.get(vid).copied()),
        });
    }
    let n_val = rows.len();
    let flagged = rows.iter().filter(|r| r.leakage_flag).count();
    let mean_abs_gap = if n_val == 0 {
        0.0
    } else {
        rows.iter().map(|r| (r.val_score - r.mean_neighbor_score).abs()).sum::<f64>() / n_val as f64
    };
    let flagged_fraction = if n_val == 0 { 0.0 } else { flagged as f64 / n_val as f64 };
    Ok(NnAudit { rows, summary: NnSummary { n_val, flagged, flagged_fraction, mean_abs_gap } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Split;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn records(ids: &[String]) -> Vec<MemRecord> {
        ids.iter().enumerate().map(|(i, id)| MemRecord { video_id: id.clone(), score: i as f64 / 100.0, split: Split::Train }).collect()
    }

    #[test]
    fn duplicate_is_flagged_and_orthogonal_is_not() {
        let train = BTreeMap::from([("t0".to_string(), vec![1.0, 0.0, 0.0]), ("t1".to_string(), vec![0.0, 1.0, 0.0])]);
        let val = BTreeMap::from([("dup".to_string(), vec![2.0, 0.0, 0.0]), ("orth".to_string(), vec![0.0, 0.0, 1.0])]);
        let ids: Vec<String> = ["t0", "t1", "dup", "orth"].iter().map(|s| s.to_string()).collect();
        let out = nn_audit(&train, &val, &records(&ids), None, 5, DEFAULT_LEAK_THRESHOLD).unwrap();
        let dup = &out.rows[0];
        assert_eq!(dup.neighbors[0], "t0");
        assert!((dup.similarities[0] - 1.0).abs() < 1e-15);
        assert!(dup.leakage_flag);
        let orth = &out.rows[1];
        assert_eq!(orth.similarities, vec![0.0, 0.0]);
        assert!(!orth.leakage_flag);
        assert_eq!(out.summary.flagged, 1);
    }

    #[test]
    fn matches_all_pairs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut vec4 = || (0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let train: BTreeMap<String, Vec<f64>> = (0..20).map(|i| (format!("t{i:02}"), vec4())).collect();
        let val: BTreeMap<String, Vec<f64>> = (0..5).map(|i| (format!("v{i}"), vec4())).collect();
        let ids: Vec<String> = train.keys().chain(val.keys()).cloned().collect();
        let out = nn_audit(&train, &val, &records(&ids), None, 5, DEFAULT_LEAK_THRESHOLD).unwrap();
        for row in &out.rows {
            let q = &val[&row.val_video_id];
            let mut all: Vec<(f64, String)> = train
                .iter()
                .map(|(id, t)| {
                    let dot: f64 = q.iter().zip(t).map(|(a, b)| a * b).sum();
                    let n = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    (dot / (n(q) * n(t)), id.clone())
                })
                .collect();
            all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let want: Vec<String> = all[..5].iter().map(|p| p.1.clone()).collect();
            assert_eq!(row.neighbors, want);
            assert!(row.similarities.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn dim_mismatch() {
        let train = BTreeMap::from([("t".to_string(), vec![1.0, 0.0])]);
        let val = BTreeMap::from([("v".to_string(), vec![1.0])]);
        assert!(matches!(nn_audit(&train, &val, &[], None, 5, 0.97), Err(AnalysisError::DimMismatch { .. })));
    }
}
