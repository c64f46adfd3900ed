//! Studies built on attention and gaze maps: label weighting by panoptic
//! segments, temporal attention with the frame-reversal control, and the
//! nearest-neighbor audit of CLS representations.

mod nn;
mod panoptic;
mod temporal;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::model::ModelError;

pub use nn::{cosine_similarity, nn_audit, NnAudit, NnAuditRow, NnSummary, DEFAULT_LEAK_THRESHOLD};
pub use panoptic::{
    assign_groups, group_for_ratio, group_memorability_distributions, label_presence, quantile_label_frequencies,
    stuff_things_cumulative, weighted_label_distribution, Category, CategoryGroups, Group, GroupAssignment,
    GroupDistributions, KsOutcome, LabelStats, ShareTriple, StuffThings, WeightedLabelDistribution,
    PRESENCE_FRACTION,
};
pub use temporal::{reversal_control, temporal_profile, ReversalControl, TemporalProfile, VideoReversal};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("raster {got:?} does not match {expected:?}")]
    RasterMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("label id {0} is not in the label table")]
    UnknownLabelId(u16),
    #[error("label id {0} occurs in no video")]
    LabelAbsent(u16),
    #[error("videos disagree on frame count: {expected} vs {got}")]
    MixedT { expected: usize, got: usize },
    #[error("representation size {got} differs from {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("no memorability score for video {0}")]
    MissingScore(String),
    #[error("need at least {need} videos, got {got}")]
    TooFewVideos { need: usize, got: usize },
    #[error("{0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
