use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::io::MemRecord;

fn check_pair(a: &[f64], b: &[f64], need: usize) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < need {
        return Err(MetricsError::TooFew { need, got: a.len() });
    }
    Ok(())
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    check_pair(a, b, 2)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if !(saa > 0.0) || !(sbb > 0.0) {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    check_pair(pred, truth, 2)?;
    pearson(&average_ranks(pred), &average_ranks(truth))
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    check_pair(pred, truth, 1)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// Mean and standard error (sample std over `sqrt(n)`; zero for one value).
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
}

/// Largest sample-size product for which the p-value is computed exactly.
const KS_EXACT_MAX: usize = 10_000;

/// `max_x |i(x) n_b - j(x) n_a|`, i.e. `D * n_a * n_b` as an integer.
fn ks_scaled_statistic(a: &[f64], b: &[f64]) -> u64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as i64, b.len() as i64);
    let (mut i, mut j, mut best) = (0usize, 0usize, 0i64);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as i64 * nb - j as i64 * na).abs());
    }
    best as u64
}

/// `P(D >= d)` under exchangeability: the share of monotone lattice paths
/// from (0, 0) to (m, n) that touch `|i n - j m| >= scaled_d`. Counts are
/// kept as probabilities of a uniformly random path to stay in range.
fn ks_exact_p(m: usize, n: usize, scaled_d: u64) -> f64 {
    if scaled_d == 0 {
        return 1.0;
    }
    let inside = |i: usize, j: usize| ((i * n) as i64 - (j * m) as i64).unsigned_abs() < scaled_d;
    // prob[j] at row i = P(random path passes (i, j) having stayed inside)
    let mut prob = vec![0.0f64; n + 1];
    prob[0] = 1.0;
    for j in 1..=n {
        // moving along b first: step j has probability (n - j + 1) / (m + n - j + 1)
        let step = (n - j + 1) as f64 / (m + n - j + 1) as f64;
        prob[j] = if inside(0, j) { prob[j - 1] * step } else { 0.0 };
    }
    for i in 1..=m {
        let mut next = vec![0.0f64; n + 1];
        for j in 0..=n {
            if !inside(i, j) {
                continue;
            }
            // remaining draws before this step: a has m-i+1, b has n-j (from (i-1, j))
            let from_a = prob[j] * (m - i + 1) as f64 / (m + n - i - j + 1) as f64;
            let from_b = if j > 0 { next[j - 1] * (n - j + 1) as f64 / (m + n - i - j + 1) as f64 } else { 0.0 };
            next[j] = from_a + from_b;
        }
        prob = next;
    }
    (1.0 - prob[n]).clamp(0.0, 1.0)
}

/// Asymptotic Kolmogorov tail with the small-sample `lambda` correction.
fn ks_asymptotic_p(na: usize, nb: usize, d: f64) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lambda == 0.0 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        total += if k % 2 == 1 { term } else { -term };
        if term < 1e-10 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test. The p-value is the exact permutation
/// tail when `|a| * |b| <= 10000` and the asymptotic series otherwise.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, MetricsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(MetricsError::TooFew { need: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len(), b.len());
    let scaled = ks_scaled_statistic(a, b);
    let d = scaled as f64 / (na * nb) as f64;
    let p = if na * nb <= KS_EXACT_MAX { ks_exact_p(na, nb, scaled) } else { ks_asymptotic_p(na, nb, d) };
    Ok(KsResult { d, p })
}

/// Per-video values of one metric with their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub per_video: BTreeMap<String, f64>,
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

impl MetricReport {
    pub fn new(name: impl Into<String>, per_video: BTreeMap<String, f64>) -> Self {
        let values: Vec<f64> = per_video.values().copied().collect();
        let (mean, sem) = mean_sem(&values);
        Self { name: name.into(), n: values.len(), per_video, mean, sem }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub bin: usize,
    pub n: usize,
    /// Lowest and highest ground-truth score in the bin.
    pub score_range: (f64, f64),
    pub mean: f64,
    pub sem: f64,
}

/// Quantile bins of videos by ground-truth score; bin `b` takes the videos of
/// sorted positions `[b n / k, (b + 1) n / k)`, ties ordered by video id.
pub fn bin_by_memorability(report: &MetricReport, records: &[MemRecord], n_bins: usize) -> Result<Vec<BinStat>, MetricsError> {
    let scores: BTreeMap<&str, f64> = records.iter().map(|r| (r.video_id.as_str(), r.score)).collect();
    let mut rows = Vec::with_capacity(report.per_video.len());
    for (id, &value) in &report.per_video {
        let score = *scores.get(id.as_str()).ok_or_else(|| MetricsError::MissingScore(id.clone()))?;
        rows.push((score, id.as_str(), value));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    let n = rows.len();
    (0..n_bins)
        .map(|b| {
            let slice = &rows[b * n / n_bins..(b + 1) * n / n_bins];
            if slice.is_empty() {
                return Err(MetricsError::EmptyBin(b));
            }
            let values: Vec<f64> = slice.iter().map(|r| r.2).collect();
            let (mean, sem) = mean_sem(&values);
            Ok(BinStat { bin: b, n: slice.len(), score_range: (slice[0].0, slice[slice.len() - 1].0), mean, sem })
        })
        .collect()
}
