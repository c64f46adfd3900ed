use super::MetricsError;
use crate::fixation::BinaryFixationMap;
use crate::raster::Grid;

pub const KLD_EPS: f64 = 1e-12;

fn same_shape(a: (usize, usize), b: (usize, usize)) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::ShapeMismatch { a, b });
    }
    Ok(())
}

fn split_by_fixation(saliency: &Grid, fix: &BinaryFixationMap) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    same_shape(saliency.dims(), (fix.rows, fix.cols))?;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&v, &m) in saliency.values().iter().zip(&fix.mask) {
        if m {
            pos.push(v);
        } else {
            neg.push(v);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(MetricsError::DegenerateFixations);
    }
    Ok((pos, neg))
}

/// ROC area of saliency as a classifier of fixated pixels, swept over every
/// distinct saliency value. Equals `P(s_fix > s_non) + P(s_fix = s_non) / 2`.
pub fn auc_judd(saliency: &Grid, fix: &BinaryFixationMap) -> Result<f64, MetricsError> {
    let (mut pos, mut neg) = split_by_fixation(saliency, fix)?;
    pos.sort_by(|a, b| b.total_cmp(a));
    neg.sort_by(|a, b| b.total_cmp(a));
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut tpr, mut fpr, mut area) = (0.0, 0.0, 0.0);
    while i < pos.len() || j < neg.len() {
        let t = match (pos.get(i), neg.get(j)) {
            (Some(&a), Some(&b)) => a.max(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < pos.len() && pos[i] >= t {
            i += 1;
        }
        while j < neg.len() && neg[j] >= t {
            j += 1;
        }
        let (t2, f2) = (i as f64 / np, j as f64 / nn);
        area += (f2 - fpr) * (t2 + tpr) / 2.0;
        tpr = t2;
        fpr = f2;
    }
    Ok(area)
}

/// Benchmark-style AUC-Judd: thresholds only at saliency values of fixated
/// pixels, curve closed through (1, 1). Differs from `auc_judd` when
/// non-fixated pixels fall between the smallest fixated value and below.
pub fn auc_judd_fixation_thresholds(saliency: &Grid, fix: &BinaryFixationMap) -> Result<f64, MetricsError> {
    let (mut pos, neg) = split_by_fixation(saliency, fix)?;
    pos.sort_by(|a, b| b.total_cmp(a));
    pos.dedup();
    let (np, nn) = (fix.count() as f64, neg.len() as f64);
    let all: Vec<f64> = saliency.values().to_vec();
    let mut pts = vec![(0.0, 0.0)];
    for &t in &pos {
        let tp = all.iter().zip(&fix.mask).filter(|(&v, &m)| m && v >= t).count() as f64;
        let fp = neg.iter().filter(|&&v| v >= t).count() as f64;
        pts.push((fp / nn, tp / np));
    }
    pts.push((1.0, 1.0));
    Ok(pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean z-scored saliency (population std) over fixated pixels.
pub fn nss(saliency: &Grid, fix: &BinaryFixationMap) -> Result<f64, MetricsError> {
    same_shape(saliency.dims(), (fix.rows, fix.cols))?;
    let (mean, std) = mean_std(saliency.values());
    if !(std > 0.0) {
        return Err(MetricsError::ZeroVariance);
    }
    let (mut total, mut n) = (0.0, 0usize);
    for (&v, &m) in saliency.values().iter().zip(&fix.mask) {
        if m {
            total += (v - mean) / std;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::DegenerateFixations);
    }
    Ok(total / n as f64)
}

/// Pearson correlation of two maps.
pub fn cc(a: &Grid, b: &Grid) -> Result<f64, MetricsError> {
    same_shape(a.dims(), b.dims())?;
    super::pearson(a.values(), b.values())
}

/// `sum G log((G + eps) / (A + eps))` with both maps normalized to sum one;
/// `fix_density` is the reference distribution.
pub fn kld(fix_density: &Grid, saliency: &Grid) -> Result<f64, MetricsError> {
    same_shape(fix_density.dims(), saliency.dims())?;
    let (sg, sa) = (fix_density.sum(), saliency.sum());
    if !(sg > 0.0) || !(sa > 0.0) {
        return Err(MetricsError::EmptyMap);
    }
    Ok(fix_density
        .values()
        .iter()
        .zip(saliency.values())
        .map(|(&g, &a)| {
            let (g, a) = (g / sg, a / sa);
            g * ((g + KLD_EPS) / (a + KLD_EPS)).ln()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixmap(rows: usize, cols: usize, mask: Vec<bool>) -> BinaryFixationMap {
        BinaryFixationMap { video_id: "v".into(), frame_index: 0, rows, cols, mask }
    }

    fn pairwise(s: &Grid, f: &BinaryFixationMap) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &a) in s.values().iter().enumerate() {
            if !f.mask[i] {
                continue;
            }
            for (j, &b) in s.values().iter().enumerate() {
                if f.mask[j] {
                    continue;
                }
                den += 1.0;
                num += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
        num / den
    }

    fn random_case(rng: &mut ChaCha8Rng, levels: u32) -> (Grid, BinaryFixationMap) {
        let s = Grid::from_fn(8, 8, |_, _| f64::from(rng.random_range(0..levels)) / f64::from(levels));
        let mut mask = vec![false; 64];
        while mask.iter().filter(|&&m| m).count() < 5 {
            mask[rng.random_range(0..64)] = true;
        }
        (s, fixmap(8, 8, mask))
    }

    #[test]
    fn auc_extremes() {
        let mask: Vec<bool> = (0..16).map(|i| i % 5 == 0).collect();
        let f = fixmap(4, 4, mask.clone());
        let ind = Grid::new(4, 4, mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect());
        assert_eq!(auc_judd(&ind, &f).unwrap(), 1.0);
        assert_eq!(auc_judd(&Grid::filled(4, 4, 0.3), &f).unwrap(), 0.5);
        assert_eq!(auc_judd(&Grid::zeros(4, 4), &fixmap(4, 4, vec![false; 16])), Err(MetricsError::DegenerateFixations));
        assert_eq!(auc_judd(&Grid::zeros(4, 4), &fixmap(4, 4, vec![true; 16])), Err(MetricsError::DegenerateFixations));
    }

    #[test]
    fn auc_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for levels in [3, 10, 1_000_000] {
            for _ in 0..20 {
                let (s, f) = random_case(&mut rng, levels);
                assert!((auc_judd(&s, &f).unwrap() - pairwise(&s, &f)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixation_threshold_variant_agrees_without_ties() {
        // with a perfect separator both variants give 1
        let mask: Vec<bool> = (0..16).map(|i| i < 3).collect();
        let s = Grid::from_fn(4, 4, |r, c| 16.0 - (r * 4 + c) as f64);
        let f = fixmap(4, 4, mask);
        assert_eq!(auc_judd_fixation_thresholds(&s, &f).unwrap(), 1.0);
        // constant map: single threshold point (1, 1)
        assert_eq!(auc_judd_fixation_thresholds(&Grid::filled(4, 4, 1.0), &f).unwrap(), 0.5);
    }

    #[test]
    fn nss_cases() {
        let f = fixmap(2, 2, vec![true; 4]);
        let s = Grid::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(nss(&s, &f).unwrap().abs() < 1e-12);
        assert_eq!(nss(&Grid::filled(2, 2, 1.0), &f), Err(MetricsError::ZeroVariance));
        // 4x4 hand case: values 0..15, fixations at 15 and 0
        let s = Grid::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let mut mask = vec![false; 16];
        mask[15] = true;
        mask[14] = true;
        let mean = 7.5;
        let std = ((0..16).map(|v| (v as f64 - mean).powi(2)).sum::<f64>() / 16.0).sqrt();
        let want = ((15.0 - mean) / std + (14.0 - mean) / std) / 2.0;
        assert!((nss(&s, &fixmap(4, 4, mask)).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn cc_cases() {
        let x = Grid::from_fn(3, 3, |r, c| ((r * 7 + c * 3) % 5) as f64);
        assert!((cc(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((cc(&x, &x.map(|v| 4.0 - v)).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(cc(&x, &Grid::filled(3, 3, 2.0)), Err(MetricsError::ZeroVariance));
    }

    #[test]
    fn kld_hand_case() {
        let g = Grid::new(3, 3, vec![1.0, 2.0, 3.0, 0.0, 1.0, 1.0, 0.0, 0.0, 2.0]);
        let a = Grid::new(3, 3, vec![2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let mut want = 0.0;
        for (gv, av) in g.values().iter().zip(a.values()) {
            let (p, q) = (gv / 10.0, av / 10.0);
            want += p * ((p + 1e-12) / (q + 1e-12)).ln();
        }
        assert!((kld(&g, &a).unwrap() - want).abs() < 1e-14);
        assert!(kld(&g, &g).unwrap().abs() < 1e-9);
        assert_eq!(kld(&Grid::zeros(3, 3), &a), Err(MetricsError::EmptyMap));
    }

    proptest! {
        #[test]
        fn auc_invariant_under_increasing_transform(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, f) = random_case(&mut rng, 20);
            let t = s.map(|v| (3.0 * v).exp() + 1.0);
            prop_assert!((auc_judd(&s, &f).unwrap() - auc_judd(&t, &f).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn nss_affine_invariant(seed in 0u64..500, a in 0.01f64..100.0, b in -50.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, f) = random_case(&mut rng, 1000);
            let t = s.map(|v| a * v + b);
            prop_assert!((nss(&s, &f).unwrap() - nss(&t, &f).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn kld_nonnegative(p in prop::collection::vec(0.0f64..1.0, 9), q in prop::collection::vec(0.01f64..1.0, 9)) {
            let g = Grid::new(3, 3, p.clone());
            prop_assume!(g.sum() > 0.0);
            prop_assert!(kld(&g, &Grid::new(3, 3, q)).unwrap() >= -1e-9);
        }
    }
}
