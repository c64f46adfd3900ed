use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;

const SCORES_HEADER: &str = "video_id,score,split";
const FIXATIONS_HEADER: &str = "participant_id,video_id,frame_index,x_px,y_px,duration_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Ground-truth memorability for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemRecord {
    pub video_id: String,
    pub score: f64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    pub participant_id: String,
    pub video_id: String,
    pub frame_index: usize,
    pub x_px: usize,
    pub y_px: usize,
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub label_id: u16,
    pub name: String,
    pub is_thing: bool,
}

/// Panoptic label vocabulary with the stuff/things flag per label.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelTable {
    pub entries: Vec<LabelEntry>,
}

impl LabelTable {
    pub fn new(entries: Vec<LabelEntry>) -> Result<Self, IoError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.name.trim().is_empty() {
                return Err(IoError::BadLabelTable(format!("label {} has an empty name", e.label_id)));
            }
            if !seen.insert(e.label_id) {
                return Err(IoError::BadLabelTable(format!("duplicate label id {}", e.label_id)));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, label_id: u16) -> Option<&LabelEntry> {
        self.entries.iter().find(|e| e.label_id == label_id)
    }

    pub fn is_thing(&self, label_id: u16) -> Option<bool> {
        self.get(label_id).map(|e| e.is_thing)
    }
}

pub fn load_label_table(path: impl AsRef<Path>) -> Result<LabelTable, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let raw: LabelTable = serde_json::from_str(&text)?;
    LabelTable::new(raw.entries)
}

fn csv_reader<'a>(text: &'a str, expected: &str) -> Result<csv::Reader<&'a [u8]>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = rdr
        .headers()
        .map_err(|e| IoError::Malformed { row: 0, message: e.to_string() })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != expected {
        return Err(IoError::BadHeader {
            expected: expected.to_string(),
            found,
        });
    }
    Ok(rdr)
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, row: usize) -> Result<&'a str, IoError> {
    rec.get(idx).ok_or_else(|| IoError::Malformed {
        row,
        message: format!("missing column {}", idx + 1),
    })
}

fn parse_num<T: std::str::FromStr>(s: &str, row: usize, what: &str) -> Result<T, IoError> {
    s.parse().map_err(|_| IoError::Malformed {
        row,
        message: format!("invalid {what} `{s}`"),
    })
}

/// Parses a scores table. Row numbers in errors are 1-based and count data rows only.
pub fn parse_scores(text: &str) -> Result<Vec<MemRecord>, IoError> {
    let mut rdr = csv_reader(text, SCORES_HEADER)?;
    let mut seen: HashSet<(Split, String)> = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IoError::Malformed { row, message: e.to_string() })?;
        let video_id = field(&rec, 0, row)?.to_string();
        let score: f64 = parse_num(field(&rec, 1, row)?, row, "score")?;
        let split: Split = field(&rec, 2, row)?
            .parse()
            .map_err(|message| IoError::Malformed { row, message })?;
        if !(0.0..=1.0).contains(&score) {
            return Err(IoError::ScoreOutOfRange { row, score });
        }
        if !seen.insert((split, video_id.clone())) {
            return Err(IoError::DuplicateVideoId {
                row,
                video_id,
                split: split.to_string(),
            });
        }
        out.push(MemRecord { video_id, score, split });
    }
    Ok(out)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<MemRecord>, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_scores(&text)
}

pub fn parse_fixations(text: &str) -> Result<Vec<FixationEvent>, IoError> {
    let mut rdr = csv_reader(text, FIXATIONS_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IoError::Malformed { row, message: e.to_string() })?;
        let frame: i64 = parse_num(field(&rec, 2, row)?, row, "frame_index")?;
        let x: i64 = parse_num(field(&rec, 3, row)?, row, "x_px")?;
        let y: i64 = parse_num(field(&rec, 4, row)?, row, "y_px")?;
        let duration_ms: f64 = parse_num(field(&rec, 5, row)?, row, "duration_ms")?;
        if x < 0 || y < 0 {
            return Err(IoError::NegativeCoordinate { row });
        }
        if frame < 0 || !(duration_ms >= 0.0) {
            return Err(IoError::Malformed {
                row,
                message: "frame_index and duration_ms must be nonnegative".into(),
            });
        }
        out.push(FixationEvent {
            participant_id: field(&rec, 0, row)?.to_string(),
            video_id: field(&rec, 1, row)?.to_string(),
            frame_index: frame as usize,
            x_px: x as usize,
            y_px: y as usize,
            duration_ms,
        });
    }
    Ok(out)
}

pub fn load_fixations(path: impl AsRef<Path>) -> Result<Vec<FixationEvent>, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_fixations(&text)
}

/// Fixations keyed by `(video_id, frame_index)`, then by participant.
pub type FixationIndex = BTreeMap<(String, usize), BTreeMap<String, Vec<FixationEvent>>>;

pub fn group_fixations(events: &[FixationEvent]) -> FixationIndex {
    let mut index = FixationIndex::new();
    for e in events {
        index
            .entry((e.video_id.clone(), e.frame_index))
            .or_default()
            .entry(e.participant_id.clone())
            .or_default()
            .push(e.clone());
    }
    index
}
