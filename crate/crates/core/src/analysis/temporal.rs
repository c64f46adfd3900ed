use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::metrics::mean_sem;
use crate::model::{extract_attention, forward, middle_frames, FeatureTensor, Float, ModelConfig, ModelParams};

/// Per frame position, mean and SEM over videos of the temporal attention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
    pub n_videos: usize,
}

pub fn temporal_profile(per_video: &[Vec<f64>]) -> Result<TemporalProfile, AnalysisError> {
    let first = per_video.first().ok_or(AnalysisError::EmptyInput("no videos"))?;
    let t = first.len();
    if let Some(bad) = per_video.iter().find(|v| v.len() != t) {
        return Err(AnalysisError::MixedT { expected: t, got: bad.len() });
    }
    let (mean, sem) = (0..t)
        .map(|i| mean_sem(&per_video.iter().map(|v| v[i]).collect::<Vec<_>>()))
        .unzip();
    Ok(TemporalProfile { mean, sem, n_videos: per_video.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReversal {
    pub video_id: String,
    /// Temporal attention by token position, frames in order.
    pub normal: Vec<f64>,
    /// Temporal attention by token position, frames fed last to first.
    pub reversed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversalControl {
    pub normal: TemporalProfile,
    pub reversed: TemporalProfile,
    pub videos: Vec<VideoReversal>,
}

/// Temporal attention with frames in order and with frames reversed while
/// position embeddings keep their order. Profiles are indexed by token
/// position, so a model that follows content rather than position shows
/// `reversed[i] == normal[T - 1 - i]`.
pub fn reversal_control<F: Float>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    videos: &[(String, FeatureTensor<F>)],
) -> Result<ReversalControl, AnalysisError> {
    let rows: Vec<VideoReversal> = videos
        .par_iter()
        .map(|(id, video)| {
            let frames = if video.frames == cfg.frames {
                video.clone()
            } else {
                video.select_frames(&middle_frames(video.frames, cfg.frames)?)
            };
            let run = |f: &FeatureTensor<F>| -> Result<Vec<f64>, AnalysisError> {
                let (_, cache) = forward(params, cfg, f, None)?;
                Ok(extract_attention(&cache, cfg)?.temporal)
            };
            Ok(VideoReversal { video_id: id.clone(), normal: run(&frames)?, reversed: run(&frames.reversed_frames())? })
        })
        .collect::<Result<_, AnalysisError>>()?;
    let normal = temporal_profile(&rows.iter().map(|r| r.normal.clone()).collect::<Vec<_>>())?;
    let reversed = temporal_profile(&rows.iter().map(|r| r.reversed.clone()).collect::<Vec<_>>())?;
    Ok(ReversalControl { normal, reversed, videos: rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SpatialEmbedding, TemporalEmbedding};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn profile_statistics() {
        let p = temporal_profile(&[vec![0.25; 4]]).unwrap();
        assert_eq!(p.mean, vec![0.25; 4]);
        assert_eq!(p.sem, vec![0.0; 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vids: Vec<Vec<f64>> = (0..9)
            .map(|_| {
                let v: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let p = temporal_profile(&vids).unwrap();
        assert!((p.mean.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        for i in 0..5 {
            let col: Vec<f64> = vids.iter().map(|v| v[i]).collect();
            let m = col.iter().sum::<f64>() / 9.0;
            let sd = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 8.0).sqrt();
            assert!((p.mean[i] - m).abs() < 1e-12 && (p.sem[i] - sd / 3.0).abs() < 1e-12);
        }
        assert!(matches!(temporal_profile(&[vec![0.5; 2], vec![1.0; 1]]), Err(AnalysisError::MixedT { expected: 2, got: 1 })));
    }

    #[test]
    fn zeroed_positions_make_reversal_a_mirror() {
        let cfg = ModelConfig {
            frames: 3,
            height: 2,
            width: 2,
            feature_dim: 6,
            hidden_dim: 8,
            layers: 2,
            heads: 2,
            temporal_embedding: TemporalEmbedding::Learnable,
            spatial_embedding: SpatialEmbedding::Learned1d,
            seed: 5,
            ..ModelConfig::default()
        };
        let mut params = ModelParams::<f64>::init(&cfg);
        params.zero_position_embeddings();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let videos: Vec<(String, FeatureTensor<f64>)> = (0..3)
            .map(|i| {
                let data = (0..3 * 4 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
                (format!("v{i}"), FeatureTensor::new(3, 2, 2, 6, data).unwrap())
            })
            .collect();
        let out = reversal_control(&params, &cfg, &videos).unwrap();
        for v in &out.videos {
            for i in 0..3 {
                assert!((v.reversed[i] - v.normal[2 - i]).abs() < 1e-10);
            }
        }
        assert_eq!(out, reversal_control(&params, &cfg, &videos).unwrap());
    }
}
