//! The toy dataset shipped in `fixtures/toy`, rebuilt deterministically.
//!
//! Four 64x48 videos with three frames each: 4x4x16 features, three viewers'
//! fixations, 32x32 fixation density maps, 32x32 attention maps from an
//! untrained model, 16x16 panoptic label maps and a label table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Result;
use attnmem_core::fixation::{build_density_map, DensityOptions};
use attnmem_core::io::json::write_json;
use attnmem_core::io::write_tensor;
use attnmem_core::model::{extract_attention, forward, SpatialEmbedding, TemporalEmbedding};
use attnmem_core::raster::pyramid_expand;
use attnmem_core::{FeatureTensor, FixationEvent, Grid, LabelEntry, LabelTable, ModelConfig, ModelParams, ScreenGeometry, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VIDEOS: usize = 4;
pub const FRAMES: usize = 3;
pub const VIDEO_DIMS: (usize, usize) = (64, 48);
pub const MAP_SIDE: usize = 32;

pub fn toy_config() -> ModelConfig {
    ModelConfig {
        frames: FRAMES,
        height: 4,
        width: 4,
        feature_dim: 16,
        hidden_dim: 16,
        layers: 2,
        heads: 2,
        mlp_ratio: 4,
        temporal_embedding: TemporalEmbedding::Fourier,
        spatial_embedding: SpatialEmbedding::Learned2d,
        use_text: false,
        max_text_tokens: 0,
        seed: 1,
    }
}

fn ids() -> Vec<String> {
    (0..VIDEOS).map(|i| format!("v{i}")).collect()
}

/// Writes `features/`, `fix/`, `attn/`, `labels/`, `fixations.csv`,
/// `scores.csv` and `label_table.json` under `dir`.
pub fn write_toy(dir: &Path) -> Result<()> {
    let cfg = toy_config();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for sub in ["features", "fix", "attn", "labels"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let params = ModelParams::<f32>::init(&cfg);
    let geom = ScreenGeometry::default();
    let opts = DensityOptions { weight_by_duration: false, output_size: MAP_SIDE };
    let mut fix_csv = String::from("participant_id,video_id,frame_index,x_px,y_px,duration_ms\n");
    let mut scores_csv = String::from("video_id,score,split\n");

    for (v, id) in ids().into_iter().enumerate() {
        let n = FRAMES * cfg.height * cfg.width * cfg.feature_dim;
        let data: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let features = FeatureTensor::new(FRAMES, cfg.height, cfg.width, cfg.feature_dim, data)?;
        write_tensor(&features.to_tensor(), dir.join("features").join(format!("{id}.stmt")))?;

        let (_, cache) = forward(&params, &cfg, &features, None)?;
        let att = extract_attention(&cache, &cfg)?;
        let maps: Vec<Grid> = (0..FRAMES).map(|f| pyramid_expand(&att.frame_grid(&cfg, f), MAP_SIDE, MAP_SIDE)).collect();
        crate::data::write_frames(&maps, &dir.join("attn").join(format!("{id}.stmt")))?;

        let center = (12 + 14 * v, 10 + 8 * v);
        let mut density = Vec::new();
        for f in 0..FRAMES {
            let mut participants: BTreeMap<String, Vec<FixationEvent>> = BTreeMap::new();
            for p in 0..3 {
                let e = FixationEvent {
                    participant_id: format!("p{p}"),
                    video_id: id.clone(),
                    frame_index: f,
                    x_px: center.0 + rng.random_range(0..7) - 3,
                    y_px: center.1 + rng.random_range(0..7) - 3,
                    duration_ms: f64::from(rng.random_range(100u32..500)),
                };
                writeln!(fix_csv, "{},{},{},{},{},{}", e.participant_id, id, f, e.x_px, e.y_px, e.duration_ms)?;
                participants.entry(e.participant_id.clone()).or_default().push(e);
            }
            density.push(build_density_map(&id, f, &participants, VIDEO_DIMS, &geom, &opts)?.grid);
        }
        crate::data::write_frames(&density, &dir.join("fix").join(format!("{id}.stmt")))?;

        // sky over ground, a person in a corner that moves with the video index
        let mut labels = Vec::with_capacity(FRAMES * 256);
        for _ in 0..FRAMES {
            for r in 0..16 {
                for c in 0..16 {
                    let person = (4 * v..4 * v + 4).contains(&c) && (8..12).contains(&r);
                    labels.push(if person { 1 } else if r < 8 { 3 } else { 5 });
                }
            }
        }
        write_tensor(&Tensor::from_u16(vec![FRAMES, 16, 16], labels)?, dir.join("labels").join(format!("{id}.stmt")))?;

        let split = if v + 1 == VIDEOS { "val" } else { "train" };
        writeln!(scores_csv, "{id},{:.2},{split}", 0.55 + 0.1 * v as f64)?;
    }
    fs::write(dir.join("fixations.csv"), fix_csv)?;
    fs::write(dir.join("scores.csv"), scores_csv)?;
    let entry = |id: u16, name: &str, is_thing: bool| LabelEntry { label_id: id, name: name.into(), is_thing };
    let table = LabelTable::new(vec![entry(1, "person", true), entry(3, "sky", false), entry(5, "grass", false)])?;
    write_json(&table, dir.join("label_table.json"))?;
    Ok(())
}

