use std::collections::BTreeMap;

use attnmem_core::fixation::{
    binarize, blur, blur_sigma, build_density_map, pixels_per_degree, DensityOptions,
};
use attnmem_core::metrics::{auc_judd, auc_percentile, cc, kld, nss, spearman, PermutationConfig, PoolVideo};
use attnmem_core::{BinaryFixationMap, FixationEvent, Grid, ScreenGeometry};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracles;
use super::{ensure, Outcome};

fn mask_map(rows: usize, cols: usize, mask: Vec<bool>) -> BinaryFixationMap {
    BinaryFixationMap { video_id: "case".into(), frame_index: 0, rows, cols, mask }
}

pub fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut auc_err, mut nss_err, mut cc_err, mut kl_max, mut sp_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        // two decimals force ties between fixated and non-fixated pixels
        let values: Vec<f64> = (0..64).map(|_| (rng.random::<f64>() * 100.0).round() / 100.0).collect();
        let mut mask = vec![false; 64];
        for k in sample(&mut rng, 64, 5) {
            mask[k] = true;
        }
        let sal = Grid::new(8, 8, values.clone());
        let fix = mask_map(8, 8, mask.clone());
        let core_auc = auc_judd(&sal, &fix).map_err(|e| e.to_string())?;
        auc_err = auc_err.max((core_auc - oracles::auc_pairwise(&values, &mask)).abs());

        let core_nss = nss(&sal, &fix).map_err(|e| e.to_string())?;
        nss_err = nss_err.max((core_nss - oracles::nss_direct(&values, &mask)).abs());
        let (a, b) = (rng.random_range(0.1..10.0), rng.random_range(-5.0..5.0));
        let shifted = nss(&sal.map(|v| a * v + b), &fix).map_err(|e| e.to_string())?;
        nss_err = nss_err.max((shifted - core_nss).abs());

        cc_err = cc_err.max((cc(&sal, &sal).map_err(|e| e.to_string())? - 1.0).abs());
        let other = Grid::new(8, 8, (0..64).map(|_| rng.random()).collect());
        let core_cc = cc(&sal, &other).map_err(|e| e.to_string())?;
        cc_err = cc_err.max((core_cc - oracles::pearson_direct(sal.values(), other.values())).abs());

        kl_max = kl_max.max(kld(&sal, &sal).map_err(|e| e.to_string())?.abs());
        let core_kl = kld(&other, &sal).map_err(|e| e.to_string())?;
        ensure((core_kl - oracles::kld_direct(other.values(), sal.values(), 1e-12)).abs() <= 1e-9, || {
            format!("kld {core_kl} disagrees with direct sum")
        })?;

        let truth: Vec<f64> = (0..30).map(|_| rng.random_range(0..8) as f64).collect();
        let pred: Vec<f64> = (0..30).map(|_| rng.random_range(0..6) as f64).collect();
        let core_sp = spearman(&pred, &truth).map_err(|e| e.to_string())?;
        sp_err = sp_err.max((core_sp - oracles::spearman_oracle(&pred, &truth)).abs());
    }
    ensure(auc_err <= 1e-9, || format!("AUC-Judd off pairwise oracle by {auc_err:e}"))?;
    ensure(nss_err <= 1e-9, || format!("NSS off by {nss_err:e}"))?;
    ensure(cc_err <= 1e-9, || format!("CC off by {cc_err:e}"))?;
    ensure(kl_max <= 1e-9, || format!("KLD(P, P) = {kl_max:e}"))?;
    ensure(sp_err <= 1e-12, || format!("Spearman off rank oracle by {sp_err:e}"))?;
    Ok(format!(
        "50 cases: AUC {auc_err:.1e}, NSS {nss_err:.1e}, CC {cc_err:.1e}, KLD(P,P) {kl_max:.1e}, Spearman {sp_err:.1e}"
    ))
}

/// Fixation events of a few viewers scattered around `center` on every frame.
pub fn viewers_around(video: &str, frames: usize, center: (usize, usize), rng: &mut ChaCha8Rng) -> Vec<FixationEvent> {
    let mut out = Vec::new();
    for f in 0..frames {
        for p in 0..3 {
            out.push(FixationEvent {
                participant_id: format!("p{p}"),
                video_id: video.to_string(),
                frame_index: f,
                x_px: center.0 + rng.random_range(0..3) - 1,
                y_px: center.1 + rng.random_range(0..3) - 1,
                duration_ms: rng.random_range(100.0..400.0),
            });
        }
    }
    out
}

/// Density maps per frame of one video's events.
pub fn density_frames(events: &[FixationEvent], frames: usize, dims: (usize, usize), size: usize) -> Vec<Grid> {
    let geom = ScreenGeometry::default();
    let opts = DensityOptions { weight_by_duration: false, output_size: size };
    (0..frames)
        .map(|f| {
            let mut participants: BTreeMap<String, Vec<FixationEvent>> = BTreeMap::new();
            for e in events.iter().filter(|e| e.frame_index == f) {
                participants.entry(e.participant_id.clone()).or_default().push(e.clone());
            }
            build_density_map(&events[0].video_id, f, &participants, dims, &geom, &opts).expect("valid events").grid
        })
        .collect()
}

fn binary(video: &str, frames: &[Grid]) -> Vec<Option<BinaryFixationMap>> {
    frames
        .iter()
        .enumerate()
        .map(|(f, g)| {
            let map = attnmem_core::SaliencyMap { video_id: video.into(), frame_index: f, grid: g.clone(), normalized: true };
            binarize(&map, 0.5).ok()
        })
        .collect()
}

pub fn percentile_pool() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (frames, dims, size) = (4, (64, 48), 32);
    // centers on a 4 x 3 lattice keep every pair of videos well apart
    let videos: Vec<(String, Vec<Grid>)> = (0..12)
        .map(|i| {
            let id = format!("v{i:02}");
            let center = (8 + 16 * (i % 4), 8 + 16 * (i / 4));
            let grids = density_frames(&viewers_around(&id, frames, center, &mut rng), frames, dims, size);
            (id, grids)
        })
        .collect();
    let pool: Vec<PoolVideo> =
        videos.iter().map(|(id, g)| PoolVideo { video_id: id.clone(), frames: binary(id, g) }).collect();
    let cfg = PermutationConfig { n_permutations: 100, seed: 9, ..PermutationConfig::default() };
    let score_all = |pool: &[PoolVideo]| -> Result<Vec<f64>, String> {
        videos
            .iter()
            .zip(pool)
            .map(|((id, grids), pv)| {
                auc_percentile(id, grids, &pv.frames, pool, &cfg).map(|r| r.percentile).map_err(|e| e.to_string())
            })
            .collect()
    };
    let scores = score_all(&pool)?;
    let lowest = scores.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(lowest >= 99.0, || format!("self-attention percentile as low as {lowest}"))?;
    ensure(score_all(&pool)? == scores, || "rerun with the same seed differs".into())?;
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    ensure(single.install(|| score_all(&pool))? == scores, || "single-threaded run differs".into())?;

    // every frame of every pool video carries the same fixation map
    let (id0, grids0) = &videos[0];
    let still = vec![grids0[0].clone(); frames];
    let copies: Vec<PoolVideo> =
        (0..5).map(|c| PoolVideo { video_id: format!("copy{c}"), frames: binary(id0, &still) }).collect();
    let same = auc_percentile("copy0", &still, &copies[0].frames, &copies, &cfg).map_err(|e| e.to_string())?;
    ensure((same.percentile - 50.0).abs() <= 0.5, || format!("identical pool gives {}", same.percentile))?;
    Ok(format!("12 videos, min percentile {lowest:.1}; identical pool {:.2}; deterministic", same.percentile))
}

pub fn fixation_formulas() -> Outcome {
    let geom = ScreenGeometry::default();
    let ppd = pixels_per_degree(&geom);
    let sigma = blur_sigma(&geom);
    let oracle = oracles::pixels_per_degree(13.77, 1.0, 23.5, 768.0);
    ensure((ppd - oracle).abs() <= 1e-12, || format!("PPD {ppd} vs direct formula {oracle}"))?;
    ensure((ppd - 7.854).abs() <= 0.01, || format!("PPD {ppd}"))?;
    ensure((sigma - 3.335).abs() <= 0.01, || format!("sigma {sigma}"))?;
    ensure((sigma - oracle / 2.355).abs() <= 1e-12, || format!("sigma {sigma} is not PPD / 2.355"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut matrix = Grid::zeros(100, 100);
    let mut placed = 0;
    while placed < 20 {
        // far enough from the border that the truncated kernel fits
        let (r, c) = (rng.random_range(15..85), rng.random_range(15..85));
        if matrix.get(r, c) == 0.0 {
            matrix.set(r, c, 1.0);
            placed += 1;
        }
    }
    let total = blur(&matrix, sigma).sum();
    ensure((total - 20.0).abs() <= 1e-6, || format!("blurred mass {total} from 20 fixations"))?;
    Ok(format!("PPD {ppd:.4}, sigma {sigma:.4}, blur mass error {:.1e}", (total - 20.0).abs()))
}
