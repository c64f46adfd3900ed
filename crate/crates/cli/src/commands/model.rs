use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use attnmem_core::analysis::{nn_audit, reversal_control};
use attnmem_core::io::json::write_json;
use attnmem_core::io::load_scores;
use attnmem_core::metrics::{mse, spearman};
use attnmem_core::model::{
    cls_representation, extract_attention, forward, load_checkpoint, middle_frames, predict as predict_one,
    save_checkpoint, train as fit, AdamConfig, StepSchedule, TrainOptions, VideoSample,
};
use attnmem_core::raster::pyramid_expand;
use attnmem_core::{FeatureTensor, ModelConfig, ModelParams, Split, TextTokens};
use serde::Serialize;

use super::Context;
use crate::args::{AttnArgs, NnArgs, PredictArgs, TemporalArgs, TrainArgs};
use crate::data::{emit, load_features, load_text, write_frames};
use crate::{usage, EXIT_OK};

fn inputs<'a>(paths: &[&'a Path], optional: &[Option<&'a Path>]) -> Vec<&'a Path> {
    paths.iter().copied().chain(optional.iter().flatten().copied()).collect()
}

pub fn train(name: &str, a: &TrainArgs, ctx: &Context) -> Result<i32> {
    if a.epochs == 0 || a.batch_size == 0 {
        return Err(usage("--epochs and --batch-size must be positive"));
    }
    if a.lr.is_nan() || a.lr <= 0.0 {
        return Err(usage("--lr must be positive"));
    }
    ctx.record(name, a, &inputs(&[&a.features, &a.scores], &[a.text.as_deref()]), Some(&a.out), true)?;
    let records = load_scores(&a.scores)?;
    let features = load_features::<f32>(&a.features)?;
    let mut text = load_text::<f32>(a.text.as_deref())?;

    let first = features.values().next().expect("nonempty");
    let mut cfg = a.model.to_config(a.seed);
    cfg.height = a.model.grid_height.unwrap_or(first.height);
    cfg.width = a.model.grid_width.unwrap_or(first.width);
    cfg.feature_dim = a.model.feature_dim.unwrap_or(first.dim);

    let mut dataset = Vec::new();
    for r in &records {
        let Some(f) = features.get(&r.video_id) else {
            ctx.note(format!("no features for {}, skipped", r.video_id));
            continue;
        };
        let t = text.remove(&r.video_id);
        if cfg.use_text && t.is_none() {
            bail!("no caption tokens for {}", r.video_id);
        }
        dataset.push(VideoSample { video_id: r.video_id.clone(), features: f.clone(), text: t, score: r.score, split: r.split });
    }
    let opts = TrainOptions {
        epochs: a.epochs,
        batch_size: a.batch_size,
        adam: AdamConfig { lr: a.lr, ..AdamConfig::default() },
        schedule: (!a.no_schedule).then_some(StepSchedule { step_epochs: a.lr_step, gamma: a.gamma }),
        sampling: a.sampling_mode(),
        seed: a.seed,
        stop_at_train_rc: a.stop_at_rc,
    };
    let outcome = fit(ModelParams::<f32>::init(&cfg), &cfg, &dataset, &opts)?;
    for e in &outcome.log.epochs {
        ctx.note(format!(
            "epoch {:>3} lr {:.3e} loss {:.5} train rc {:.4}{}",
            e.epoch,
            e.lr,
            e.train_loss,
            e.train_rc,
            e.val_rc.map(|v| format!(" val rc {v:.4}")).unwrap_or_default()
        ));
    }
    save_checkpoint(&outcome.best, &cfg, &a.out)?;
    write_json(&outcome.log, a.out.join("training_log.json"))?;
    Ok(EXIT_OK)
}

struct Loaded {
    cfg: ModelConfig,
    params: ModelParams<f32>,
    features: BTreeMap<String, FeatureTensor<f32>>,
    text: BTreeMap<String, TextTokens<f32>>,
}

fn load(checkpoint: &Path, features: &Path, text: Option<&Path>) -> Result<Loaded> {
    let (cfg, params) = load_checkpoint::<f32>(checkpoint).with_context(|| format!("checkpoint {}", checkpoint.display()))?;
    Ok(Loaded { cfg, params, features: load_features(features)?, text: load_text(text)? })
}

#[derive(Serialize)]
struct Predictions {
    predictions: BTreeMap<String, f64>,
    n: usize,
    spearman: Option<f64>,
    mse: Option<f64>,
}

pub fn predict(name: &str, a: &PredictArgs, ctx: &Context) -> Result<i32> {
    if a.split.is_some() && a.scores.is_none() {
        return Err(usage("--split needs --scores"));
    }
    ctx.record(name, a, &inputs(&[&a.checkpoint, &a.features], &[a.text.as_deref(), a.scores.as_deref()]), a.out.as_deref(), false)?;
    let m = load(&a.checkpoint, &a.features, a.text.as_deref())?;
    let records = a.scores.as_deref().map(load_scores).transpose()?;
    let wanted: Option<Split> = a.split.map(Into::into);
    let truth: BTreeMap<&str, (f64, Split)> =
        records.iter().flatten().map(|r| (r.video_id.as_str(), (r.score, r.split))).collect();
    let mut predictions = BTreeMap::new();
    for (id, f) in &m.features {
        if wanted.is_some_and(|s| truth.get(id.as_str()).map(|t| t.1) != Some(s)) {
            continue;
        }
        predictions.insert(id.clone(), predict_one(&m.params, &m.cfg, f, m.text.get(id))?);
    }
    let scored: Vec<(f64, f64)> =
        predictions.iter().filter_map(|(id, &p)| truth.get(id.as_str()).map(|t| (p, t.0))).collect();
    let (pred, gt): (Vec<f64>, Vec<f64>) = scored.into_iter().unzip();
    let out = Predictions {
        n: predictions.len(),
        spearman: (records.is_some() && pred.len() >= 2).then(|| spearman(&pred, &gt)).transpose()?,
        mse: (records.is_some() && !pred.is_empty()).then(|| mse(&pred, &gt)).transpose()?,
        predictions,
    };
    emit(&out, a.out.as_deref())?;
    Ok(EXIT_OK)
}

fn model_frames(cfg: &ModelConfig, f: &FeatureTensor<f32>) -> Result<(FeatureTensor<f32>, Vec<usize>)> {
    let idx = middle_frames(f.frames, cfg.frames)?;
    Ok((f.select_frames(&idx), idx))
}

#[derive(Serialize)]
struct VideoAttention {
    /// Source frame behind each attention frame.
    frames: Vec<usize>,
    temporal: Vec<f64>,
}

pub fn attn(name: &str, a: &AttnArgs, ctx: &Context) -> Result<i32> {
    if a.size == 0 {
        return Err(usage("--size must be positive"));
    }
    ctx.record(name, a, &inputs(&[&a.checkpoint, &a.features], &[a.text.as_deref()]), Some(&a.out), true)?;
    let m = load(&a.checkpoint, &a.features, a.text.as_deref())?;
    std::fs::create_dir_all(&a.out)?;
    let mut summary = BTreeMap::new();
    for (id, f) in &m.features {
        let (frames, idx) = model_frames(&m.cfg, f)?;
        let (_, cache) = forward(&m.params, &m.cfg, &frames, m.text.get(id))?;
        let result = extract_attention(&cache, &m.cfg)?;
        let maps: Vec<_> =
            (0..m.cfg.frames).map(|i| pyramid_expand(&result.frame_grid(&m.cfg, i), a.size, a.size)).collect();
        write_frames(&maps, &a.out.join(format!("{id}.stmt")))?;
        summary.insert(id.clone(), VideoAttention { frames: idx, temporal: result.temporal });
    }
    write_json(&summary, a.out.join("attention.json"))?;
    Ok(EXIT_OK)
}

pub fn temporal(name: &str, a: &TemporalArgs, ctx: &Context) -> Result<i32> {
    ctx.record(name, a, &[&a.checkpoint, &a.features], a.out.as_deref(), false)?;
    let m = load(&a.checkpoint, &a.features, None)?;
    let videos: Vec<(String, FeatureTensor<f32>)> = m.features.into_iter().collect();
    let control = reversal_control(&m.params, &m.cfg, &videos)?;
    emit(&control, a.out.as_deref())?;
    Ok(EXIT_OK)
}

pub fn nn(name: &str, a: &NnArgs, ctx: &Context) -> Result<i32> {
    if a.k == 0 {
        return Err(usage("-k must be positive"));
    }
    ctx.record(name, a, &inputs(&[&a.checkpoint, &a.features, &a.scores], &[a.text.as_deref()]), a.out.as_deref(), false)?;
    let m = load(&a.checkpoint, &a.features, a.text.as_deref())?;
    let records = load_scores(&a.scores)?;
    let (mut train, mut val, mut preds) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
    for r in &records {
        let Some(f) = m.features.get(&r.video_id) else { continue };
        let text = m.text.get(&r.video_id);
        let rep = cls_representation(&m.params, &m.cfg, f, text)?;
        match r.split {
            Split::Train => {
                train.insert(r.video_id.clone(), rep);
            }
            Split::Val => {
                preds.insert(r.video_id.clone(), predict_one(&m.params, &m.cfg, f, text)?);
                val.insert(r.video_id.clone(), rep);
            }
            Split::Test => {}
        }
    }
    let audit = nn_audit(&train, &val, &records, Some(&preds), a.k, a.leak_threshold)?;
    emit(&audit, a.out.as_deref())?;
    Ok(EXIT_OK)
}
