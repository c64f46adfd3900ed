use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{kmeans, StudyError};
use crate::io::MemRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinMode {
    /// Equal-width bins over `[min, max]` of the scores.
    EqualWidth,
    /// Equal-count bins by score rank.
    Quantile,
}

/// Bin index of every score.
pub fn score_bins(scores: &[f64], n_bins: usize, mode: BinMode) -> Vec<usize> {
    let n_bins = n_bins.max(1);
    match mode {
        BinMode::EqualWidth => {
            let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            scores
                .iter()
                .map(|&s| {
                    if hi > lo {
                        (((s - lo) / (hi - lo) * n_bins as f64) as usize).min(n_bins - 1)
                    } else {
                        0
                    }
                })
                .collect()
        }
        BinMode::Quantile => {
            let mut idx: Vec<usize> = (0..scores.len()).collect();
            idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
            let mut bins = vec![0; scores.len()];
            for (rank, &i) in idx.iter().enumerate() {
                bins[i] = rank * n_bins / scores.len();
            }
            bins
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Target,
    Vigilance,
    Filler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedVideo {
    pub video_id: String,
    pub cluster: usize,
    pub bin: usize,
    pub category: Option<Category>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    pub videos: Vec<PlannedVideo>,
}

impl SelectionPlan {
    pub fn ids_in(&self, category: Category) -> Vec<&str> {
        self.videos.iter().filter(|v| v.category == Some(category)).map(|v| v.video_id.as_str()).collect()
    }
}

/// Clusters mean-pooled features with k-means and bins ground-truth scores,
/// then draws one random video per nonempty (cluster, bin) cell per pass
/// until `target` are chosen; any excess from the last pass is removed
/// uniformly at random.
pub fn select_videos(
    features: &[(String, Vec<f64>)],
    records: &[MemRecord],
    k: usize,
    n_bins: usize,
    target: usize,
    mode: BinMode,
    seed: u64,
) -> Result<SelectionPlan, StudyError> {
    if features.len() < target {
        return Err(StudyError::InsufficientVideos { need: target, have: features.len() });
    }
    let by_id: BTreeMap<&str, f64> = records.iter().map(|r| (r.video_id.as_str(), r.score)).collect();
    let scores = features
        .iter()
        .map(|(id, _)| by_id.get(id.as_str()).copied().ok_or_else(|| StudyError::MissingScore(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let points: Vec<Vec<f64>> = features.iter().map(|(_, f)| f.clone()).collect();
    let clusters = kmeans(&points, k, seed)?.assignments;
    let bins = score_bins(&scores, n_bins, mode);

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for i in 0..features.len() {
        cells.entry((clusters[i], bins[i])).or_default().push(i);
    }
    for stock in cells.values_mut() {
        stock.shuffle(&mut rng);
    }
    let mut chosen = Vec::with_capacity(target + cells.len());
    while chosen.len() < target {
        for stock in cells.values_mut() {
            if let Some(i) = stock.pop() {
                chosen.push(i);
            }
        }
    }
    if chosen.len() > target {
        chosen.shuffle(&mut rng);
        chosen.truncate(target);
    }
    chosen.sort_by(|&a, &b| features[a].0.cmp(&features[b].0));
    Ok(SelectionPlan {
        videos: chosen
            .into_iter()
            .map(|i| PlannedVideo { video_id: features[i].0.clone(), cluster: clusters[i], bin: bins[i], category: None })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub targets: usize,
    pub vigilance: usize,
    pub fillers: usize,
}

impl Default for CategoryCounts {
    fn default() -> Self {
        Self { targets: 20, vigilance: 40, fillers: 80 }
    }
}

impl CategoryCounts {
    pub fn total(&self) -> usize {
        self.targets + self.vigilance + self.fillers
    }

    /// Slots of a sequence showing repeats twice and fillers once.
    pub fn slots(&self) -> usize {
        2 * (self.targets + self.vigilance) + self.fillers
    }
}

/// Draws `counts.total()` videos of the pool without replacement and splits
/// them at random into targets, vigilance repeats and fillers.
pub fn refine_and_categorize(pool: &SelectionPlan, counts: CategoryCounts, seed: u64) -> Result<SelectionPlan, StudyError> {
    if pool.videos.len() < counts.total() {
        return Err(StudyError::InsufficientVideos { need: counts.total(), have: pool.videos.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<PlannedVideo> = pool.videos.choose_multiple(&mut rng, counts.total()).cloned().collect();
    picked.shuffle(&mut rng);
    for (i, v) in picked.iter_mut().enumerate() {
        v.category = Some(if i < counts.targets {
            Category::Target
        } else if i < counts.targets + counts.vigilance {
            Category::Vigilance
        } else {
            Category::Filler
        });
    }
    picked.sort_by(|a, b| a.category.cmp(&b.category).then(a.video_id.cmp(&b.video_id)));
    Ok(SelectionPlan { videos: picked })
}
