use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auc_judd, MetricsError};
use crate::fixation::BinaryFixationMap;
use crate::raster::Grid;

/// How the null fixation map's frame is chosen inside the drawn video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameChoice {
    /// Any frame of the drawn video, uniformly.
    Uniform,
    /// The frame with the same index as the frame under test; videos without
    /// that frame are not drawn.
    IndexMatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub n_permutations: usize,
    pub seed: u64,
    pub frame_choice: FrameChoice,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self { n_permutations: 100, seed: 0, frame_choice: FrameChoice::Uniform }
    }
}

/// Fixation maps of one other video, indexed by frame; `None` marks frames
/// without a usable map.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolVideo {
    pub video_id: String,
    pub frames: Vec<Option<BinaryFixationMap>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileResult {
    pub video_id: String,
    /// Mean of the scored frames' percentiles.
    pub percentile: f64,
    pub per_frame: Vec<Option<f64>>,
    /// Frames left out, with the reason.
    pub skipped: Vec<(usize, String)>,
}

fn stream_seed(seed: u64, video_id: &str) -> u64 {
    // FNV-1a over the id keeps streams of different videos apart
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in video_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

/// Percentile of each frame's AUC-Judd within AUC-Judd scores against
/// fixation maps drawn from other videos, averaged over frames.
///
/// Frame `i` draws from its own RNG stream, so results do not depend on
/// thread count. Ties between true and null scores count half.
pub fn auc_percentile(
    video_id: &str,
    attention: &[Grid],
    fixations: &[Option<BinaryFixationMap>],
    pool: &[PoolVideo],
    cfg: &PermutationConfig,
) -> Result<PercentileResult, MetricsError> {
    if cfg.n_permutations == 0 {
        return Err(MetricsError::NoPermutations);
    }
    if attention.len() != fixations.len() {
        return Err(MetricsError::LengthMismatch(attention.len(), fixations.len()));
    }
    let others: Vec<(&str, Vec<&BinaryFixationMap>, &[Option<BinaryFixationMap>])> = pool
        .iter()
        .filter(|v| v.video_id != video_id)
        .map(|v| (v.video_id.as_str(), v.frames.iter().flatten().collect::<Vec<_>>(), v.frames.as_slice()))
        .filter(|(_, valid, _)| !valid.is_empty())
        .collect();
    if others.is_empty() {
        return Err(MetricsError::EmptyPool);
    }
    let base_seed = stream_seed(cfg.seed, video_id);

    let outcomes: Vec<Result<f64, String>> = (0..attention.len())
        .into_par_iter()
        .map(|i| {
            let fix = fixations[i].as_ref().ok_or_else(|| "no usable fixation map".to_string())?;
            let truth = auc_judd(&attention[i], fix).map_err(|e| e.to_string())?;
            let candidates: Vec<&BinaryFixationMap> = match cfg.frame_choice {
                FrameChoice::Uniform => Vec::new(),
                FrameChoice::IndexMatched => {
                    others.iter().filter_map(|(_, _, frames)| frames.get(i).and_then(Option::as_ref)).collect()
                }
            };
            if cfg.frame_choice == FrameChoice::IndexMatched && candidates.is_empty() {
                return Err(format!("no pool video has frame {i}"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream(i as u64);
            let mut score = 0.0;
            for _ in 0..cfg.n_permutations {
                let null_map = match cfg.frame_choice {
                    FrameChoice::Uniform => {
                        let (_, valid, _) = &others[rng.random_range(0..others.len())];
                        valid[rng.random_range(0..valid.len())]
                    }
                    FrameChoice::IndexMatched => candidates[rng.random_range(0..candidates.len())],
                };
                let null = auc_judd(&attention[i], null_map).map_err(|e| e.to_string())?;
                if null < truth {
                    score += 1.0;
                } else if null == truth {
                    score += 0.5;
                }
            }
            Ok(100.0 * score / cfg.n_permutations as f64)
        })
        .collect();

    let mut per_frame = Vec::with_capacity(outcomes.len());
    let mut skipped = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(p) => per_frame.push(Some(p)),
            Err(reason) => {
                per_frame.push(None);
                skipped.push((i, reason));
            }
        }
    }
    let scored: Vec<f64> = per_frame.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(MetricsError::NoValidFrames(video_id.to_string()));
    }
    Ok(PercentileResult {
        video_id: video_id.to_string(),
        percentile: scored.iter().sum::<f64>() / scored.len() as f64,
        per_frame,
        skipped,
    })
}
