//! Spatio-temporal transformer memorability predictor.
//!
//! Frame features (`T x H x W x D`) are projected to the hidden size, tagged
//! with temporal and spatial position embeddings, prefixed by a CLS token and
//! run through a pre-LN transformer encoder. The CLS output feeds a small MLP
//! that regresses the memorability score, and the CLS row of the last layer's
//! head-averaged attention is the model's spatio-temporal saliency.

mod attention;
mod checkpoint;
mod config;
mod features;
mod network;
pub(crate) mod ops;
mod params;
mod sampling;
mod train;

use thiserror::Error;

use crate::io::IoError;

pub use attention::{extract_attention, AttentionResult};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{fourier_temporal_embeddings, ModelConfig, SpatialEmbedding, TemporalEmbedding};
pub use features::{FeatureTensor, TextTokens};
pub use network::{
    cls_representation, forward, loss_and_grads, predict, predict_batch, Example, ForwardCache,
    LayerCache,
};
pub use params::{LayerParams, ModelParams, NamedTensor};
pub use sampling::{middle_frames, sample_segments, segment_bounds, FrameSampler, SamplingMode};
pub use train::{train, AdamConfig, EpochRecord, StepSchedule, TrainOptions, TrainOutcome, TrainingLog, VideoSample};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("Fourier embeddings need an even hidden size, got {0}")]
    OddDim(usize),
    #[error("cannot take {t} segments from {n_frames} frames")]
    TooFewFrames { n_frames: usize, t: usize },
    #[error("forward cache holds no attention")]
    MissingCache,
    #[error("text tokens required when use_text is set")]
    MissingText,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Scalar type the network runs in: `f32` for training, `f64` for verification.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::iter::Sum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self;
    fn to_f64_lossy(self) -> f64;
    fn into_tensor_data(values: Vec<Self>) -> crate::io::TensorData;
    fn from_tensor(t: &crate::io::Tensor) -> Vec<Self>;
}

impl Float for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
    fn into_tensor_data(values: Vec<Self>) -> crate::io::TensorData {
        crate::io::TensorData::F32(values)
    }
    fn from_tensor(t: &crate::io::Tensor) -> Vec<Self> {
        match t.data() {
            crate::io::TensorData::F32(v) => v.clone(),
            _ => t.to_f64_vec().into_iter().map(|x| x as f32).collect(),
        }
    }
}

impl Float for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn to_f64_lossy(self) -> f64 {
        self
    }
    fn into_tensor_data(values: Vec<Self>) -> crate::io::TensorData {
        crate::io::TensorData::F64(values)
    }
    fn from_tensor(t: &crate::io::Tensor) -> Vec<Self> {
        t.to_f64_vec()
    }
}
