//! Spatio-temporal attention model for video memorability, with the gaze,
//! saliency-metric and analysis tooling used to study what it attends to.

pub mod fixation;
pub mod io;
pub mod metrics;
pub mod model;
pub mod raster;
pub mod analysis;
pub mod study;

pub use fixation::{BinaryFixationMap, SaliencyMap, ScreenGeometry};
pub use io::{DType, FixationEvent, LabelEntry, LabelTable, MemRecord, Split, Tensor, TensorData};
pub use metrics::MetricReport;
pub use model::{FeatureTensor, Float, ModelConfig, ModelParams, TextTokens};
pub use raster::{Grid, LabelGrid, MAP_SIZE};
