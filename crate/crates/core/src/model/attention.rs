use serde::{Deserialize, Serialize};

use super::{Float, ForwardCache, ModelConfig, ModelError};
use crate::raster::{pyramid_expand, Grid, MAP_SIZE};

/// CLS attention over the visual tokens of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionResult {
    /// Length `T*H*W`, nonnegative, sums to one.
    pub alpha: Vec<f64>,
    /// Per-frame `H x W` slice of `alpha` expanded to 224 x 224.
    pub frame_maps: Vec<Grid>,
    /// Per-frame sums of `alpha`.
    pub temporal: Vec<f64>,
}

impl AttentionResult {
    pub fn frame_grid(&self, cfg: &ModelConfig, frame: usize) -> Grid {
        let hw = cfg.spatial_tokens();
        Grid::new(cfg.height, cfg.width, self.alpha[frame * hw..(frame + 1) * hw].to_vec())
    }
}

/// Last-layer attention, averaged over heads, CLS row, with the CLS self
/// entry and any text entries dropped and the rest renormalized.
pub fn extract_attention<F: Float>(cache: &ForwardCache<F>, cfg: &ModelConfig) -> Result<AttentionResult, ModelError> {
    let last = cache.layers.last().ok_or(ModelError::MissingCache)?;
    let s_len = cache.seq_len;
    let n_vis = cache.visual_tokens;
    if last.probs.len() != cfg.heads * s_len * s_len || n_vis != cfg.visual_tokens() {
        return Err(ModelError::MissingCache);
    }
    let mut alpha = vec![0.0; n_vis];
    for h in 0..cfg.heads {
        let row = &last.probs[h * s_len * s_len..h * s_len * s_len + s_len];
        for (a, p) in alpha.iter_mut().zip(&row[1..1 + n_vis]) {
            *a += p.to_f64_lossy();
        }
    }
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);

    let hw = cfg.spatial_tokens();
    let temporal: Vec<f64> = alpha.chunks_exact(hw).map(|c| c.iter().sum()).collect();
    let frame_maps = alpha
        .chunks_exact(hw)
        .map(|c| pyramid_expand(&Grid::new(cfg.height, cfg.width, c.to_vec()), MAP_SIZE, MAP_SIZE))
        .collect();
    Ok(AttentionResult { alpha, frame_maps, temporal })
}
