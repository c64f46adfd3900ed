//! Brute-force reference implementations used only for checking.

use rand::seq::SliceRandom;
use rand::Rng;

/// P(s_fix > s_nonfix) + P(s_fix = s_nonfix) / 2 over every pair.
pub fn auc_pairwise(saliency: &[f64], fixated: &[bool]) -> f64 {
    let pos: Vec<f64> = saliency.iter().zip(fixated).filter(|(_, &f)| f).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = saliency.iter().zip(fixated).filter(|(_, &f)| !f).map(|(&s, _)| s).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

pub fn nss_direct(saliency: &[f64], fixated: &[bool]) -> f64 {
    let n = saliency.len() as f64;
    let mean = saliency.iter().sum::<f64>() / n;
    let sd = (saliency.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    let picked: Vec<f64> = saliency.iter().zip(fixated).filter(|(_, &f)| f).map(|(&s, _)| (s - mean) / sd).collect();
    picked.iter().sum::<f64>() / picked.len() as f64
}

pub fn pearson_direct(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Rank of each value: values below it plus the mid position among equals.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    pearson_direct(&mid_ranks(a), &mid_ranks(b))
}

pub fn kld_direct(reference: &[f64], other: &[f64], eps: f64) -> f64 {
    let (sr, so) = (reference.iter().sum::<f64>(), other.iter().sum::<f64>());
    reference
        .iter()
        .zip(other)
        .map(|(r, o)| {
            let (g, a) = (r / sr, o / so);
            g * ((g + eps) / (a + eps)).ln()
        })
        .sum()
}

/// Largest ECDF gap, evaluated at every sample point.
pub fn ks_d(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter().chain(b).map(|&x| (ecdf(a, x) - ecdf(b, x)).abs()).fold(0.0, f64::max)
}

/// Share of random relabelings of the pooled sample whose statistic reaches
/// the observed one. Assumes distinct values.
pub fn ks_permutation_p<R: Rng>(a: &[f64], b: &[f64], resamples: usize, rng: &mut R) -> f64 {
    let observed = ks_d(a, b);
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut labels: Vec<bool> = pooled.iter().map(|p| p.1).collect();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut hits = 0usize;
    for _ in 0..resamples {
        labels.shuffle(rng);
        let (mut ca, mut cb, mut d) = (0.0, 0.0, 0.0f64);
        for &is_a in &labels {
            if is_a {
                ca += 1.0;
            } else {
                cb += 1.0;
            }
            d = d.max((ca / na - cb / nb).abs());
        }
        if d >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / resamples as f64
}

pub fn pixels_per_degree(distance_in: f64, angle_deg: f64, screen_h_in: f64, res_y: f64) -> f64 {
    2.0 * distance_in * (angle_deg.to_radians() / 2.0).tan() * res_y / screen_h_in
}
