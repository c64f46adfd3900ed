use attnmem_core::analysis::reversal_control;
use attnmem_core::io::Split;
use attnmem_core::model::{
    extract_attention, forward, loss_and_grads, train, AdamConfig, Example, SamplingMode, SpatialEmbedding,
    TemporalEmbedding, TrainOptions, VideoSample,
};
use attnmem_core::{FeatureTensor, Float, ModelConfig, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{ensure, Outcome};

/// T=3, 4x4 grid, 16-d features and hidden size, two layers of two heads.
pub fn toy_config(temporal: TemporalEmbedding, seed: u64) -> ModelConfig {
    ModelConfig {
        frames: 3,
        height: 4,
        width: 4,
        feature_dim: 16,
        hidden_dim: 16,
        layers: 2,
        heads: 2,
        mlp_ratio: 4,
        temporal_embedding: temporal,
        spatial_embedding: SpatialEmbedding::Learned2d,
        use_text: false,
        max_text_tokens: 0,
        seed,
    }
}

fn random_video<F: Float>(cfg: &ModelConfig, frames: usize, rng: &mut ChaCha8Rng) -> FeatureTensor<F> {
    let n = frames * cfg.height * cfg.width * cfg.feature_dim;
    let data = (0..n).map(|_| F::of(rng.random_range(-1.0..1.0))).collect();
    FeatureTensor::new(frames, cfg.height, cfg.width, cfg.feature_dim, data).expect("consistent shape")
}

fn jittered(cfg: &ModelConfig, rng: &mut ChaCha8Rng, scale: f64) -> ModelParams<f64> {
    let mut p = ModelParams::<f64>::init(cfg);
    for b in p.buffers_mut() {
        b.iter_mut().for_each(|v| *v += rng.random_range(-scale..scale));
    }
    p
}

fn direct_loss(params: &ModelParams<f64>, cfg: &ModelConfig, batch: &[Example<f64>]) -> f64 {
    let n = batch.len() as f64;
    batch
        .iter()
        .map(|ex| {
            let (pred, _) = forward(params, cfg, &ex.features, None).expect("valid input");
            (pred - ex.target).powi(2) / n
        })
        .sum()
}

/// Central differences of the loss, recomputed from scratch through the
/// forward pass, against the analytic gradient, tensor by tensor.
pub fn gradient_oracle() -> Outcome {
    let cfg = toy_config(TemporalEmbedding::Learnable, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = jittered(&cfg, &mut rng, 0.1);
    let batch: Vec<Example<f64>> = (0..2)
        .map(|_| Example { features: random_video(&cfg, cfg.frames, &mut rng), text: None, target: rng.random() })
        .collect();
    let (_, grads) = loss_and_grads(&params, &cfg, &batch).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst = (String::new(), 0.0f64);
    let mut entries = 0;
    for t in params.named(&cfg) {
        let analytic = grads.tensor(&cfg, &t.name).expect("same layout").to_vec();
        let numeric: Vec<f64> = (0..t.values.len())
            .into_par_iter()
            .map(|k| {
                let mut p = params.clone();
                p.tensor_mut(&cfg, &t.name).expect("known")[k] += h;
                let up = direct_loss(&p, &cfg, &batch);
                p.tensor_mut(&cfg, &t.name).expect("known")[k] -= 2.0 * h;
                let down = direct_loss(&p, &cfg, &batch);
                (up - down) / (2.0 * h)
            })
            .collect();
        entries += numeric.len();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
        let scale = norm(&analytic).max(norm(&numeric));
        let rel = if scale > 0.0 { norm(&diff) / scale } else { norm(&diff) };
        if rel > worst.1 {
            worst = (t.name.clone(), rel);
        }
    }
    ensure(worst.1 <= 1e-6, || format!("{}: relative error {:.3e}", worst.0, worst.1))?;
    Ok(format!("{entries} entries, worst relative error {:.2e} ({})", worst.1, worst.0))
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Videos whose score is a fixed function of the mean of feature channel 0.
pub fn synthetic_videos(cfg: &ModelConfig, n: usize, frames: usize, seed: u64) -> Vec<VideoSample<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.2).expect("valid sd");
    let unit = Normal::new(0.0, 1.0).expect("valid sd");
    let d = cfg.feature_dim;
    (0..n)
        .map(|i| {
            let level: f64 = rng.random_range(-1.0..1.0);
            let len = frames * cfg.height * cfg.width * d;
            let mut data = vec![0f32; len];
            for (k, v) in data.iter_mut().enumerate() {
                let x = if k % d == 0 { level + noise.sample(&mut rng) } else { unit.sample(&mut rng) };
                *v = x as f32;
            }
            let mean0 = data.iter().step_by(d).map(|&v| v as f64).sum::<f64>() / (len / d) as f64;
            VideoSample {
                video_id: format!("syn{i:03}"),
                features: FeatureTensor::new(frames, cfg.height, cfg.width, d, data).expect("consistent shape"),
                text: None,
                score: sigmoid(2.0 * mean0),
                split: Split::Train,
            }
        })
        .collect()
}

pub fn synthetic_training() -> Outcome {
    let cfg = toy_config(TemporalEmbedding::Fourier, 5);
    let data = synthetic_videos(&cfg, 64, 6, 21);
    let opts = TrainOptions {
        epochs: 200,
        batch_size: 8,
        adam: AdamConfig { lr: 1e-3, ..AdamConfig::default() },
        schedule: None,
        sampling: SamplingMode::RandomInSegment,
        seed: 7,
        stop_at_train_rc: Some(0.9),
    };
    let run = || train(ModelParams::<f32>::init(&cfg), &cfg, &data, &opts).map_err(|e| e.to_string());
    let first = run()?;
    let second = run()?;
    ensure(first.log == second.log, || "training logs differ between identical runs".into())?;
    ensure(first.last.buffers() == second.last.buffers(), || "weights differ between identical runs".into())?;
    let rc = first.log.epochs.iter().map(|e| e.train_rc).fold(f64::NEG_INFINITY, f64::max);
    let epochs = first.log.epochs.len();
    ensure(rc >= 0.9, || format!("train RC peaked at {rc:.4} after {epochs} epochs"))?;
    Ok(format!("train RC {rc:.4} after {epochs} epochs; two runs identical"))
}

pub fn attention_invariants() -> Outcome {
    let mut worst_sum = 0.0f64;
    let mut min_alpha = f64::INFINITY;
    for seed in 0..100u64 {
        let temporal = if seed % 2 == 0 { TemporalEmbedding::Learnable } else { TemporalEmbedding::Fourier };
        let cfg = toy_config(temporal, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let params = jittered(&cfg, &mut rng, 0.3);
        let video = random_video::<f64>(&cfg, cfg.frames, &mut rng);
        let (_, cache) = forward(&params, &cfg, &video, None).map_err(|e| e.to_string())?;
        let att = extract_attention(&cache, &cfg).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((att.alpha.iter().sum::<f64>() - 1.0).abs());
        min_alpha = att.alpha.iter().copied().fold(min_alpha, f64::min);
    }
    ensure(worst_sum <= 1e-5, || format!("alpha sums off by {worst_sum:e}"))?;
    ensure(min_alpha >= 0.0, || format!("negative alpha {min_alpha:e}"))?;

    let cfg = toy_config(TemporalEmbedding::Learnable, 99);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut params = jittered(&cfg, &mut rng, 0.3);
    params.zero_position_embeddings();
    let videos: Vec<(String, FeatureTensor<f64>)> =
        (0..10).map(|i| (format!("v{i}"), random_video(&cfg, cfg.frames, &mut rng))).collect();
    let rc = reversal_control(&params, &cfg, &videos).map_err(|e| e.to_string())?;
    let mut worst_rev = 0.0f64;
    for v in &rc.videos {
        let t = v.normal.len();
        for i in 0..t {
            worst_rev = worst_rev.max((v.reversed[i] - v.normal[t - 1 - i]).abs());
        }
    }
    ensure(worst_rev <= 1e-5, || format!("reversed temporal profile off by {worst_rev:e}"))?;
    Ok(format!(
        "100 inputs: |sum-1| <= {worst_sum:.1e}, min alpha {min_alpha:.1e}; reversal error {worst_rev:.1e}"
    ))
}
