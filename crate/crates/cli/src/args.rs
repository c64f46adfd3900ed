use std::path::PathBuf;

use attnmem_core::metrics::FrameChoice;
use attnmem_core::model::{ModelConfig, SamplingMode, SpatialEmbedding, TemporalEmbedding};
use attnmem_core::study::BinMode;
use attnmem_core::Split;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "attnmem", version, about = "Video memorability attention model and gaze analysis tools")]
pub struct Cli {
    /// Worker threads. Defaults to every core, or 1 for `train`.
    #[arg(long, global = true, env = "ATTNMEM_THREADS")]
    pub threads: Option<usize>,

    /// Manifest path. Defaults to next to the output, else ./attnmem.manifest.json.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Train the memorability model on a feature directory.
    Train(TrainArgs),
    /// Predict scores for every video of a feature directory.
    Predict(PredictArgs),
    /// Write CLS attention maps per video.
    Attn(AttnArgs),
    /// Build fixation density maps from a fixation table.
    Fixmap(FixmapArgs),
    /// AUC-Judd, NSS, CC, KLD and AUC-Percentile of attention against gaze.
    Metrics(MetricsArgs),
    /// AUC-Percentile only, with per-frame detail.
    AucPercentile(PercentileArgs),
    /// Label statistics of attention and gaze over panoptic label maps.
    Panoptic(PanopticArgs),
    /// Temporal attention profile with the frame-reversal control.
    Temporal(TemporalArgs),
    /// Nearest training neighbors of validation videos in CLS space.
    Nn(NnArgs),
    /// Pick a representative video set for a repeat-detection study.
    Select(SelectArgs),
    /// Order a study plan into a presentation sequence, or check one.
    Sequence(SequenceArgs),
    /// Run the oracle and invariant suite.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Attn(_) => "attn",
            Command::Fixmap(_) => "fixmap",
            Command::Metrics(_) => "metrics",
            Command::AucPercentile(_) => "auc-percentile",
            Command::Panoptic(_) => "panoptic",
            Command::Temporal(_) => "temporal",
            Command::Nn(_) => "nn",
            Command::Select(_) => "select",
            Command::Sequence(_) => "sequence",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalArg {
    Fourier,
    Learnable,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialArg {
    None,
    #[value(name = "learned-1d")]
    Learned1d,
    #[value(name = "learned-2d")]
    Learned2d,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingArg {
    Random,
    Middle,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameChoiceArg {
    Uniform,
    IndexMatched,
}

impl From<FrameChoiceArg> for FrameChoice {
    fn from(v: FrameChoiceArg) -> Self {
        match v {
            FrameChoiceArg::Uniform => FrameChoice::Uniform,
            FrameChoiceArg::IndexMatched => FrameChoice::IndexMatched,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BinModeArg {
    EqualWidth,
    Quantile,
}

impl From<BinModeArg> for BinMode {
    fn from(v: BinModeArg) -> Self {
        match v {
            BinModeArg::EqualWidth => BinMode::EqualWidth,
            BinModeArg::Quantile => BinMode::Quantile,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(v: SplitArg) -> Self {
        match v {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

/// Overrides of the desk-scale model defaults.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Frames per video fed to the model (T).
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub grid_height: Option<usize>,
    #[arg(long)]
    pub grid_width: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long, value_enum)]
    pub temporal: Option<TemporalArg>,
    #[arg(long, value_enum)]
    pub spatial: Option<SpatialArg>,
    /// Caption tokens per video; enables the text branch.
    #[arg(long)]
    pub max_text_tokens: Option<usize>,
}

impl ModelArgs {
    pub fn to_config(&self, seed: u64) -> ModelConfig {
        let d = ModelConfig::default();
        ModelConfig {
            frames: self.frames.unwrap_or(d.frames),
            height: self.grid_height.unwrap_or(d.height),
            width: self.grid_width.unwrap_or(d.width),
            feature_dim: self.feature_dim.unwrap_or(d.feature_dim),
            hidden_dim: self.hidden_dim.unwrap_or(d.hidden_dim),
            layers: self.layers.unwrap_or(d.layers),
            heads: self.heads.unwrap_or(d.heads),
            mlp_ratio: d.mlp_ratio,
            temporal_embedding: match self.temporal {
                Some(TemporalArg::Learnable) => TemporalEmbedding::Learnable,
                Some(TemporalArg::Fourier) => TemporalEmbedding::Fourier,
                None => d.temporal_embedding,
            },
            spatial_embedding: match self.spatial {
                Some(SpatialArg::None) => SpatialEmbedding::None,
                Some(SpatialArg::Learned1d) => SpatialEmbedding::Learned1d,
                Some(SpatialArg::Learned2d) => SpatialEmbedding::Learned2d,
                None => d.spatial_embedding,
            },
            use_text: self.max_text_tokens.is_some_and(|n| n > 0),
            max_text_tokens: self.max_text_tokens.unwrap_or(0),
            seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Directory of `<video_id>.stmt` feature tensors, shape N x H x W x D.
    #[arg(long)]
    pub features: PathBuf,
    /// Optional directory of `<video_id>.stmt` caption token tensors, shape L x d.
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub scores: PathBuf,
    /// Checkpoint directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    /// Epochs between learning-rate decays.
    #[arg(long, default_value_t = 10)]
    pub lr_step: usize,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Keep the learning rate constant.
    #[arg(long)]
    pub no_schedule: bool,
    #[arg(long, value_enum, default_value = "random")]
    pub sampling: SamplingArg,
    /// Stop once the train-split Spearman RC reaches this value.
    #[arg(long)]
    pub stop_at_rc: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainArgs {
    pub fn sampling_mode(&self) -> SamplingMode {
        match self.sampling {
            SamplingArg::Random => SamplingMode::RandomInSegment,
            SamplingArg::Middle => SamplingMode::MiddleOfSegment,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Ground truth; adds Spearman RC and MSE to the output.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Only predict videos of this split (requires --scores).
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AttnArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Output directory: `<video_id>.stmt` maps (T x size x size) and attention.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 224)]
    pub size: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FixmapArgs {
    /// Fixation table (participant_id,video_id,frame_index,x_px,y_px,duration_ms).
    #[arg(long)]
    pub fixations: PathBuf,
    /// Video width in pixels.
    #[arg(long)]
    pub width: usize,
    /// Video height in pixels.
    #[arg(long)]
    pub height: usize,
    /// Restrict to these videos (repeatable).
    #[arg(long = "video")]
    pub videos: Vec<String>,
    /// Frames per video; defaults to the largest frame index seen plus one.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long, default_value_t = 224)]
    pub size: usize,
    /// Sum fixation durations instead of marking presence.
    #[arg(long)]
    pub weight_by_duration: bool,
    #[arg(long, default_value_t = 13.77)]
    pub distance_in: f64,
    #[arg(long, default_value_t = 23.5)]
    pub screen_height_in: f64,
    #[arg(long, default_value_t = 768)]
    pub screen_res_y: usize,
    #[arg(long, default_value_t = 1.0)]
    pub visual_angle_deg: f64,
    /// Also write one 8-bit PGM per frame.
    #[arg(long)]
    pub pgm: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PermutationArgs {
    /// Fixation maps drawn for the null distribution. Defaults to the other
    /// `.stmt` files next to (or inside) --fix.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    pub frame_choice: FrameChoiceArg,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsArgs {
    /// Attention maps: one `.stmt` file (F x H x W) or a directory of them.
    #[arg(long)]
    pub attn: PathBuf,
    /// Fixation density maps matching --attn.
    #[arg(long)]
    pub fix: PathBuf,
    /// Density threshold for the binary fixation maps.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[command(flatten)]
    pub perm: PermutationArgs,
    /// Ground truth; adds per-memorability-bin summaries.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub bins: usize,
    /// Summarize over frames (keys `<video>:<frame>`) instead of per-video means.
    #[arg(long, conflicts_with = "scores")]
    pub per_frame: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PercentileArgs {
    #[arg(long)]
    pub attn: PathBuf,
    #[arg(long)]
    pub fix: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[command(flatten)]
    pub perm: PermutationArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PanopticArgs {
    /// Directory of `<video_id>.stmt` u16 label maps, T x H' x W'.
    #[arg(long)]
    pub labels: PathBuf,
    /// Directory of attention maps, T x S x S.
    #[arg(long)]
    pub attn: PathBuf,
    /// Directory of fixation density maps, T x S x S.
    #[arg(long)]
    pub gaze: Option<PathBuf>,
    /// Label table JSON: {"entries": [{"label_id", "name", "is_thing"}]}.
    #[arg(long)]
    pub label_table: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub quantiles: usize,
    /// Share of a frame's pixels a label must own to count as present.
    #[arg(long, default_value_t = attnmem_core::analysis::PRESENCE_FRACTION)]
    pub presence: f64,
    /// Per-label table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TemporalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct NnArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(short, long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = attnmem_core::analysis::DEFAULT_LEAK_THRESHOLD)]
    pub leak_threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    /// Feature directory; videos are clustered on mean-pooled features.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value_t = 28)]
    pub clusters: usize,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = 200)]
    pub target: usize,
    #[arg(long, value_enum, default_value = "equal-width")]
    pub bin_mode: BinModeArg,
    #[arg(long, default_value_t = 20)]
    pub targets: usize,
    #[arg(long, default_value_t = 40)]
    pub vigilance: usize,
    #[arg(long, default_value_t = 80)]
    pub fillers: usize,
    /// Stop after the cluster x bin pool; do not assign categories.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SequenceArgs {
    /// Categorized selection plan JSON.
    #[arg(long, required_unless_present = "check", conflicts_with = "check")]
    pub plan: Option<PathBuf>,
    /// Validate an existing sequence JSON instead; exits 1 on violations.
    #[arg(long)]
    pub check: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_attempts: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Run only these criteria (repeatable); 0 is the tensor-file round trips.
    #[arg(long = "only")]
    pub only: Vec<u8>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
