//! Saliency comparison metrics and score statistics.

mod percentile;
mod saliency;
mod stats;

use thiserror::Error;

pub use percentile::{auc_percentile, FrameChoice, PercentileResult, PermutationConfig, PoolVideo};
pub use saliency::{auc_judd, auc_judd_fixation_thresholds, cc, kld, nss, KLD_EPS};
pub use stats::{
    average_ranks, bin_by_memorability, ks_two_sample, mean_sem, mse, pearson, spearman, BinStat, KsResult,
    MetricReport,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("fixation map is all fixated or has no fixations")]
    DegenerateFixations,
    #[error("map has zero variance")]
    ZeroVariance,
    #[error("map sums to zero")]
    EmptyMap,
    #[error("map shapes differ: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("inputs differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("permutation pool is empty")]
    EmptyPool,
    #[error("n_permutations must be at least 1")]
    NoPermutations,
    #[error("video {0} has no frame usable for scoring")]
    NoValidFrames(String),
    #[error("no memorability score for video {0}")]
    MissingScore(String),
    #[error("bin {0} is empty")]
    EmptyBin(usize),
}
