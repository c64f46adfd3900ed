use serde::{Deserialize, Serialize};

use super::{Float, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalEmbedding {
    Fourier,
    Learnable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialEmbedding {
    None,
    /// One row per grid cell.
    Learned1d,
    /// Separate row and column tables, summed.
    Learned2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Frames per video (T).
    pub frames: usize,
    /// Feature grid height (H).
    pub height: usize,
    /// Feature grid width (W).
    pub width: usize,
    /// Backbone feature size (D).
    pub feature_dim: usize,
    /// Transformer width (d).
    pub hidden_dim: usize,
    pub layers: usize,
    pub heads: usize,
    #[serde(default = "default_mlp_ratio")]
    pub mlp_ratio: usize,
    pub temporal_embedding: TemporalEmbedding,
    pub spatial_embedding: SpatialEmbedding,
    pub use_text: bool,
    pub max_text_tokens: usize,
    pub seed: u64,
}

fn default_mlp_ratio() -> usize {
    4
}

impl Default for ModelConfig {
    /// Desk-scale defaults: 5 frames of 7x7x64 features.
    fn default() -> Self {
        Self {
            frames: 5,
            height: 7,
            width: 7,
            feature_dim: 64,
            hidden_dim: 32,
            layers: 2,
            heads: 4,
            mlp_ratio: 4,
            temporal_embedding: TemporalEmbedding::Fourier,
            spatial_embedding: SpatialEmbedding::None,
            use_text: false,
            max_text_tokens: 0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let named = [
            ("frames", self.frames),
            ("height", self.height),
            ("width", self.width),
            ("feature_dim", self.feature_dim),
            ("hidden_dim", self.hidden_dim),
            ("layers", self.layers),
            ("heads", self.heads),
            ("mlp_ratio", self.mlp_ratio),
        ];
        if let Some((name, _)) = named.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be >= 1")));
        }
        if self.hidden_dim % self.heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "hidden_dim {} not divisible by heads {}",
                self.hidden_dim, self.heads
            )));
        }
        if self.temporal_embedding == TemporalEmbedding::Fourier && self.hidden_dim % 2 == 1 {
            return Err(ModelError::OddDim(self.hidden_dim));
        }
        if self.use_text && self.max_text_tokens == 0 {
            return Err(ModelError::InvalidConfig("use_text needs max_text_tokens >= 1".into()));
        }
        Ok(())
    }

    pub fn spatial_tokens(&self) -> usize {
        self.height * self.width
    }

    pub fn visual_tokens(&self) -> usize {
        self.frames * self.spatial_tokens()
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }

    pub fn mlp_dim(&self) -> usize {
        self.hidden_dim * self.mlp_ratio
    }

    /// Sequence length without text: CLS plus one token per (frame, cell).
    pub fn base_seq_len(&self) -> usize {
        1 + self.visual_tokens()
    }

    pub(crate) fn temporal_table<F: Float>(&self) -> Option<Vec<F>> {
        match self.temporal_embedding {
            TemporalEmbedding::Fourier => Some(
                fourier_temporal_embeddings(self.frames, self.hidden_dim)
                    .expect("validated config")
                    .into_iter()
                    .map(F::of)
                    .collect(),
            ),
            TemporalEmbedding::Learnable => None,
        }
    }
}

/// Sinusoidal table, row-major `T x d`: column `2k` is `sin(i / 10000^(2k/d))`,
/// column `2k+1` the matching cosine.
pub fn fourier_temporal_embeddings(frames: usize, dim: usize) -> Result<Vec<f64>, ModelError> {
    if dim % 2 == 1 {
        return Err(ModelError::OddDim(dim));
    }
    let mut table = vec![0.0; frames * dim];
    for i in 0..frames {
        for k in 0..dim / 2 {
            let angle = i as f64 / 10000f64.powf(2.0 * k as f64 / dim as f64);
            table[i * dim + 2 * k] = angle.sin();
            table[i * dim + 2 * k + 1] = angle.cos();
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_row_zero_alternates() {
        let t = fourier_temporal_embeddings(3, 6).unwrap();
        assert_eq!(&t[..6], &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn fourier_matches_scalar_formula() {
        let t = fourier_temporal_embeddings(5, 4).unwrap();
        // column pairs k = 0 (freq 1) and k = 1 (freq 1/100)
        for i in 0..5 {
            let x = i as f64;
            let expect = [x.sin(), x.cos(), (x / 100.0).sin(), (x / 100.0).cos()];
            for c in 0..4 {
                assert!((t[i * 4 + c] - expect[c]).abs() < 1e-15);
            }
        }
        assert!(t.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn odd_dim_rejected() {
        assert!(matches!(fourier_temporal_embeddings(2, 5), Err(ModelError::OddDim(5))));
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad = ModelConfig { heads: 3, ..ModelConfig::default() };
        assert!(bad.validate().is_err());
        let zero = ModelConfig { layers: 0, ..ModelConfig::default() };
        assert!(zero.validate().is_err());
        assert_eq!(ModelConfig::default().base_seq_len(), 246);
    }
}
