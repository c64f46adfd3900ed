//! Experiment design: choosing a representative video set and ordering it
//! into a repeat-detection presentation sequence.

mod kmeans;
mod selection;
mod sequence;

use thiserror::Error;

pub use kmeans::{kmeans, KMeansResult, MAX_LLOYD_ITERS};
pub use selection::{
    refine_and_categorize, score_bins, select_videos, BinMode, Category, CategoryCounts, PlannedVideo, SelectionPlan,
};
pub use sequence::{
    generate_sequence, validate_sequence, PresentationSequence, SequenceSlot, Violation, MIN_TARGET_LAG, VIGILANCE_LAGS,
};

#[derive(Debug, Error, PartialEq)]
pub enum StudyError {
    #[error("k-means needs at least {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("points differ in dimension: {expected} vs {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("need {need} videos, only {have} available")]
    InsufficientVideos { need: usize, have: usize },
    #[error("no memorability score for video {0}")]
    MissingScore(String),
    #[error("no valid sequence found after {0} attempts")]
    ConstraintUnsatisfiable(usize),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}
