//! Seeded inputs shared by the benchmarks.

use attnmem_core::model::{SpatialEmbedding, TemporalEmbedding};
use attnmem_core::{BinaryFixationMap, FeatureTensor, Grid, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The default desk-scale model: 5 frames of 7x7x64 features.
pub fn desk_config() -> ModelConfig {
    ModelConfig { temporal_embedding: TemporalEmbedding::Fourier, spatial_embedding: SpatialEmbedding::Learned2d, ..ModelConfig::default() }
}

pub fn random_video(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> FeatureTensor<f32> {
    let n = cfg.frames * cfg.height * cfg.width * cfg.feature_dim;
    let data = (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureTensor::new(cfg.frames, cfg.height, cfg.width, cfg.feature_dim, data).expect("consistent shape")
}

pub fn random_map(side: usize, rng: &mut ChaCha8Rng) -> Grid {
    Grid::from_fn(side, side, |_, _| rng.random())
}

/// About `share` of the pixels fixated.
pub fn random_fixations(side: usize, share: f64, rng: &mut ChaCha8Rng) -> BinaryFixationMap {
    let mut mask: Vec<bool> = (0..side * side).map(|_| rng.random_bool(share)).collect();
    mask[0] = true;
    mask[1] = false;
    BinaryFixationMap { video_id: "bench".into(), frame_index: 0, rows: side, cols: side, mask }
}

pub fn blob_points(k: usize, per: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(k * per);
    for _ in 0..k {
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..100.0)).collect();
        for _ in 0..per {
            out.push(c.iter().map(|x| x + rng.random_range(-1.0..1.0)).collect());
        }
    }
    out
}
