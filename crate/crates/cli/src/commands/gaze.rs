use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use attnmem_core::fixation::{binarize, blur_sigma, build_density_map, pixels_per_degree, DensityOptions};
use attnmem_core::io::json::write_json;
use attnmem_core::io::{group_fixations, load_fixations, load_scores};
use attnmem_core::metrics::{
    auc_judd, auc_percentile, bin_by_memorability, cc, kld, nss, MetricsError, PercentileResult, PermutationConfig,
    PoolVideo,
};
use attnmem_core::{BinaryFixationMap, Grid, MetricReport, SaliencyMap, ScreenGeometry};
use rayon::prelude::*;
use serde::Serialize;

use super::Context;
use crate::args::{FixmapArgs, MetricsArgs, PercentileArgs, PermutationArgs};
use crate::data::{emit, read_frames, stmt_files, stmt_inputs, write_frames};
use crate::{usage, EXIT_OK};

#[derive(Serialize)]
struct FixmapVideo {
    frames: usize,
    /// Frames without any fixation; written as all-zero maps.
    empty_frames: Vec<usize>,
}

#[derive(Serialize)]
struct FixmapSummary {
    pixels_per_degree: f64,
    sigma_px: f64,
    videos: BTreeMap<String, FixmapVideo>,
}

pub fn fixmap(name: &str, a: &FixmapArgs, ctx: &Context) -> Result<i32> {
    if a.size == 0 || a.width == 0 || a.height == 0 {
        return Err(usage("--size, --width and --height must be positive"));
    }
    let geom = ScreenGeometry {
        distance_in: a.distance_in,
        screen_h_in: a.screen_height_in,
        screen_res_y: a.screen_res_y as f64,
        visual_angle_deg: a.visual_angle_deg,
    };
    if geom.validate().is_err() {
        return Err(usage("screen geometry values must be positive"));
    }
    ctx.record(name, a, &[&a.fixations], Some(&a.out), true)?;
    let events = load_fixations(&a.fixations)?;
    let index = group_fixations(&events);
    let mut frame_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (video, frame) in index.keys() {
        let n = frame_counts.entry(video.as_str()).or_default();
        *n = (*n).max(frame + 1);
    }
    for v in &a.videos {
        if !frame_counts.contains_key(v.as_str()) {
            bail!("no fixations for video {v}");
        }
    }
    let opts = DensityOptions { weight_by_duration: a.weight_by_duration, output_size: a.size };
    let empty = BTreeMap::new();
    fs::create_dir_all(&a.out)?;
    let mut videos = BTreeMap::new();
    for (&video, &seen) in &frame_counts {
        if !a.videos.is_empty() && !a.videos.iter().any(|v| v == video) {
            continue;
        }
        let frames = a.frames.unwrap_or(seen);
        let maps = (0..frames)
            .into_par_iter()
            .map(|f| {
                let participants = index.get(&(video.to_string(), f)).unwrap_or(&empty);
                if participants.is_empty() {
                    return Ok(None);
                }
                build_density_map(video, f, participants, (a.width, a.height), &geom, &opts).map(Some)
            })
            .collect::<Result<Vec<Option<SaliencyMap>>, _>>()?;
        let empty_frames: Vec<usize> = (0..frames).filter(|&f| maps[f].is_none()).collect();
        let grids: Vec<Grid> = maps.into_iter().map(|m| m.map_or_else(|| Grid::zeros(a.size, a.size), |m| m.grid)).collect();
        write_frames(&grids, &a.out.join(format!("{video}.stmt")))?;
        if a.pgm {
            for (f, g) in grids.iter().enumerate() {
                let path = a.out.join(format!("{video}_{f:04}.pgm"));
                g.write_pgm(BufWriter::new(File::create(&path)?)).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        if !empty_frames.is_empty() {
            ctx.note(format!("{video}: {} frame(s) without fixations", empty_frames.len()));
        }
        videos.insert(video.to_string(), FixmapVideo { frames, empty_frames });
    }
    let summary = FixmapSummary { pixels_per_degree: pixels_per_degree(&geom), sigma_px: blur_sigma(&geom), videos };
    write_json(&summary, a.out.join("fixmap.json"))?;
    Ok(EXIT_OK)
}

/// Binary maps of density frames; frames with nothing above threshold are `None`.
fn binary_frames(video_id: &str, density: &[Grid], threshold: f64) -> Vec<Option<BinaryFixationMap>> {
    density
        .iter()
        .enumerate()
        .map(|(f, g)| {
            let map = SaliencyMap { video_id: video_id.to_string(), frame_index: f, grid: g.clone(), normalized: true };
            binarize(&map, threshold).ok()
        })
        .collect()
}

struct Video {
    id: String,
    attention: Vec<Grid>,
    density: Vec<Grid>,
    binary: Vec<Option<BinaryFixationMap>>,
}

fn load_videos(attn: &Path, fix: &Path, threshold: f64) -> Result<Vec<Video>> {
    let attn_files = stmt_inputs(attn)?;
    let fix_files = stmt_inputs(fix)?;
    if attn_files.is_empty() {
        bail!("no attention maps in {}", attn.display());
    }
    let single = attn_files.len() == 1 && fix_files.len() == 1 && !attn.is_dir() && !fix.is_dir();
    let mut out = Vec::new();
    for (id, a_path) in &attn_files {
        let f_path = if single {
            fix_files.values().next().expect("one file")
        } else {
            fix_files.get(id).with_context(|| format!("no fixation maps for {id}"))?
        };
        let attention = read_frames(a_path)?;
        let density = read_frames(f_path)?;
        if attention.len() != density.len() {
            bail!("{id}: {} attention frames vs {} fixation frames", attention.len(), density.len());
        }
        if attention[0].dims() != density[0].dims() {
            bail!("{id}: attention maps are {:?}, fixation maps {:?}", attention[0].dims(), density[0].dims());
        }
        let binary = binary_frames(id, &density, threshold);
        out.push(Video { id: id.clone(), attention, density, binary });
    }
    Ok(out)
}

fn pool_dir(perm: &PermutationArgs, fix: &Path) -> PathBuf {
    match &perm.pool {
        Some(p) => p.clone(),
        None if fix.is_dir() => fix.to_path_buf(),
        None => fix.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf(),
    }
}

fn load_pool(dir: &Path, threshold: f64) -> Result<Vec<PoolVideo>> {
    stmt_files(dir)?
        .into_iter()
        .map(|(id, p)| {
            let frames = binary_frames(&id, &read_frames(&p)?, threshold);
            Ok(PoolVideo { video_id: id, frames })
        })
        .collect()
}

fn permutation_config(perm: &PermutationArgs) -> Result<PermutationConfig> {
    if perm.permutations == 0 {
        return Err(usage("--permutations must be at least 1"));
    }
    Ok(PermutationConfig { n_permutations: perm.permutations, seed: perm.seed, frame_choice: perm.frame_choice.into() })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn warn_skipped(video: &str, metric: &str, frame: usize, e: &MetricsError) {
    eprintln!("warning: {video} frame {frame}: {metric} skipped ({e})");
}

/// `None` when no frame of the video could be scored.
fn scored_percentile(v: &Video, pool: &[PoolVideo], cfg: &PermutationConfig) -> Result<Option<PercentileResult>> {
    match auc_percentile(&v.id, &v.attention, &v.binary, pool, cfg) {
        Ok(pr) => {
            for (f, reason) in &pr.skipped {
                eprintln!("warning: {} frame {f}: auc_percentile skipped ({reason})", v.id);
            }
            Ok(Some(pr))
        }
        Err(MetricsError::NoValidFrames(_)) => {
            eprintln!("warning: {}: no frame usable for auc_percentile", v.id);
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub const SALIENCY_METRICS: [&str; 5] = ["auc_judd", "auc_percentile", "cc", "kld", "nss"];

pub fn metrics(name: &str, a: &MetricsArgs, ctx: &Context) -> Result<i32> {
    let cfg = permutation_config(&a.perm)?;
    if a.bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    let pool_path = pool_dir(&a.perm, &a.fix);
    let mut inputs: Vec<&Path> = vec![&a.attn, &a.fix, &pool_path];
    inputs.extend(a.scores.as_deref());
    ctx.record(name, a, &inputs, a.out.as_deref(), false)?;
    let videos = load_videos(&a.attn, &a.fix, a.threshold)?;
    let pool = load_pool(&pool_path, a.threshold)?;

    let mut per_metric: BTreeMap<&str, BTreeMap<String, f64>> = SALIENCY_METRICS.iter().map(|&m| (m, BTreeMap::new())).collect();
    let mut record = |metric: &str, video: &str, frame_values: &[(usize, f64)]| {
        let slot = per_metric.get_mut(metric).expect("known");
        if a.per_frame {
            slot.extend(frame_values.iter().map(|&(f, x)| (format!("{video}:{f:04}"), x)));
        } else if let Some(m) = mean(&frame_values.iter().map(|&(_, x)| x).collect::<Vec<_>>()) {
            slot.insert(video.to_string(), m);
        }
    };
    for v in &videos {
        let (mut auc, mut ns, mut c, mut kl) = (vec![], vec![], vec![], vec![]);
        for (f, (att, den)) in v.attention.iter().zip(&v.density).enumerate() {
            if let Some(bin) = &v.binary[f] {
                match auc_judd(att, bin) {
                    Ok(x) => auc.push((f, x)),
                    Err(e) => warn_skipped(&v.id, "auc_judd", f, &e),
                }
                match nss(att, bin) {
                    Ok(x) => ns.push((f, x)),
                    Err(e) => warn_skipped(&v.id, "nss", f, &e),
                }
            } else {
                eprintln!("warning: {} frame {f}: no fixation density at or above {}", v.id, a.threshold);
            }
            match cc(att, den) {
                Ok(x) => c.push((f, x)),
                Err(e) => warn_skipped(&v.id, "cc", f, &e),
            }
            match kld(den, att) {
                Ok(x) => kl.push((f, x)),
                Err(e) => warn_skipped(&v.id, "kld", f, &e),
            }
        }
        for (metric, values) in [("auc_judd", &auc), ("nss", &ns), ("cc", &c), ("kld", &kl)] {
            record(metric, &v.id, values);
        }
        if let Some(pr) = scored_percentile(v, &pool, &cfg)? {
            let frames: Vec<(usize, f64)> = pr.per_frame.iter().enumerate().filter_map(|(f, x)| x.map(|x| (f, x))).collect();
            record("auc_percentile", &v.id, &frames);
        }
    }

    let records = a.scores.as_deref().map(load_scores).transpose()?;
    let mut out = BTreeMap::new();
    for (metric, per_video) in per_metric {
        let report = MetricReport::new(metric, per_video);
        let mut value = serde_json::to_value(&report)?;
        if let Some(records) = &records {
            value["bins"] = serde_json::to_value(bin_by_memorability(&report, records, a.bins)?)?;
        }
        out.insert(metric.to_string(), value);
    }
    emit(&out, a.out.as_deref())?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct PercentileOutput {
    videos: Vec<PercentileResult>,
    auc_percentile: MetricReport,
}

pub fn percentile(name: &str, a: &PercentileArgs, ctx: &Context) -> Result<i32> {
    let cfg = permutation_config(&a.perm)?;
    let pool_path = pool_dir(&a.perm, &a.fix);
    ctx.record(name, a, &[&a.attn, &a.fix, &pool_path], a.out.as_deref(), false)?;
    let videos = load_videos(&a.attn, &a.fix, a.threshold)?;
    let pool = load_pool(&pool_path, a.threshold)?;
    let mut results = Vec::new();
    for v in &videos {
        results.extend(scored_percentile(v, &pool, &cfg)?);
    }
    let per_video = results.iter().map(|r| (r.video_id.clone(), r.percentile)).collect();
    let out = PercentileOutput { videos: results, auc_percentile: MetricReport::new("auc_percentile", per_video) };
    emit(&out, a.out.as_deref())?;
    Ok(EXIT_OK)
}
