//! On-disk formats shared by every stage: tensor files, CSV tables, label tables
//! and JSON result helpers.

mod records;
pub mod json;
pub mod tensor;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use records::{
    group_fixations, load_fixations, load_label_table, load_scores, parse_fixations, parse_scores,
    FixationEvent, FixationIndex, LabelEntry, LabelTable, MemRecord, Split,
};
pub use tensor::{read_tensor, write_tensor, DType, Tensor, TensorData};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("bad magic at byte offset {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported version {version} at byte offset {offset}")]
    UnsupportedVersion { offset: usize, version: u8 },
    #[error("unsupported dtype code {code} at byte offset {offset}")]
    UnsupportedDtype { offset: usize, code: u8 },
    #[error("truncated payload: data ends at byte offset {offset}")]
    TruncatedPayload { offset: usize },
    #[error("unexpected trailing bytes starting at byte offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("tensor rank {0} outside 1..=5")]
    BadRank(usize),
    #[error("shape {shape:?} does not match {len} values")]
    ShapeMismatch { shape: Vec<usize>, len: usize },
    #[error("refusing to write an empty tensor")]
    EmptyTensor,
    #[error("{path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad CSV header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("row {row}: score {score} outside [0, 1]")]
    ScoreOutOfRange { row: usize, score: f64 },
    #[error("row {row}: duplicate video id `{video_id}` in split {split}")]
    DuplicateVideoId {
        row: usize,
        video_id: String,
        split: String,
    },
    #[error("row {row}: negative coordinate")]
    NegativeCoordinate { row: usize },
    #[error("label table: {0}")]
    BadLabelTable(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::IoFailure {
            path: path.to_path_buf(),
            source,
        }
    }
}
