use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    loss_and_grads, predict, Example, FeatureTensor, Float, FrameSampler, ModelConfig, ModelError, ModelParams,
    SamplingMode, TextTokens,
};
use crate::io::Split;
use crate::metrics::spearman;

/// One video of the training corpus with all of its frames.
#[derive(Debug, Clone)]
pub struct VideoSample<F> {
    pub video_id: String,
    pub features: FeatureTensor<F>,
    pub text: Option<TextTokens<F>>,
    pub score: f64,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Multiplies the learning rate by `gamma` every `step_epochs` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub step_epochs: usize,
    pub gamma: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { step_epochs: 10, gamma: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub schedule: Option<StepSchedule>,
    pub sampling: SamplingMode,
    /// Drives shuffling and frame sampling.
    pub seed: u64,
    /// Stop once train Spearman RC reaches this value.
    pub stop_at_train_rc: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            adam: AdamConfig::default(),
            schedule: Some(StepSchedule::default()),
            sampling: SamplingMode::RandomInSegment,
            seed: 0,
            stop_at_train_rc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_rc: f64,
    pub val_rc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters are kept as `best`; the last epoch without a val split.
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    pub last: ModelParams<F>,
    pub best: ModelParams<F>,
    pub log: TrainingLog,
}

struct Adam<F> {
    cfg: AdamConfig,
    m: ModelParams<F>,
    v: ModelParams<F>,
    t: i32,
}

impl<F: Float> Adam<F> {
    fn new(cfg: AdamConfig, model: &ModelConfig) -> Self {
        Self { cfg, m: ModelParams::zeros(model), v: ModelParams::zeros(model), t: 0 }
    }

    fn step(&mut self, params: &mut ModelParams<F>, grads: &ModelParams<F>, lr: f64) {
        self.t += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 / (1.0 - b1.powi(self.t));
        let c2 = 1.0 / (1.0 - b2.powi(self.t));
        let (b1, b2, c1, c2, lr, eps) = (F::of(b1), F::of(b2), F::of(c1), F::of(c2), F::of(lr), F::of(self.cfg.eps));
        let bufs = params
            .buffers_mut()
            .into_iter()
            .zip(grads.buffers())
            .zip(self.m.buffers_mut().into_iter().zip(self.v.buffers_mut()));
        for ((p, g), (m, v)) in bufs {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (F::one() - b1) * g[i];
                v[i] = b2 * v[i] + (F::one() - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] * c1) / ((v[i] * c2).sqrt() + eps);
            }
        }
    }
}

fn split_rc<F: Float>(params: &ModelParams<F>, cfg: &ModelConfig, videos: &[&VideoSample<F>]) -> Result<f64, ModelError> {
    let mut pred = Vec::with_capacity(videos.len());
    for v in videos {
        pred.push(predict(params, cfg, &v.features, v.text.as_ref())?);
    }
    let truth: Vec<f64> = videos.iter().map(|v| v.score).collect();
    Ok(spearman(&pred, &truth).unwrap_or(0.0))
}

/// Adam on the MSE loss. Each epoch draws fresh frames per video, shuffles the
/// train split into mini-batches, then scores train and val splits with
/// middle-of-segment frames. Deterministic given `opts.seed`.
pub fn train<F: Float>(
    params: ModelParams<F>,
    cfg: &ModelConfig,
    dataset: &[VideoSample<F>],
    opts: &TrainOptions,
) -> Result<TrainOutcome<F>, ModelError> {
    cfg.validate()?;
    let train_set: Vec<&VideoSample<F>> = dataset.iter().filter(|v| v.split == Split::Train).collect();
    let val_set: Vec<&VideoSample<F>> = dataset.iter().filter(|v| v.split == Split::Val).collect();
    if train_set.is_empty() {
        return Err(ModelError::EmptyTrainSplit);
    }
    let batch_size = opts.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut sampler = FrameSampler::new(opts.sampling, opts.seed.wrapping_add(1));
    let mut adam = Adam::new(opts.adam, cfg);
    let mut params = params;
    let mut best = params.clone();
    let mut best_rc = f64::NEG_INFINITY;
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..opts.epochs {
        let lr = match opts.schedule {
            Some(s) if s.step_epochs > 0 => opts.adam.lr * s.gamma.powi((epoch / s.step_epochs) as i32),
            _ => opts.adam.lr,
        };
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch_size) {
            let mut batch = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let v = train_set[i];
                let idx = sampler.sample(v.features.frames, cfg.frames)?;
                batch.push(Example { features: v.features.select_frames(&idx), text: v.text.clone(), target: v.score });
            }
            let (loss, grads) = loss_and_grads(&params, cfg, &batch)?;
            loss_sum += loss * chunk.len() as f64;
            adam.step(&mut params, &grads, lr);
        }
        let train_rc = split_rc(&params, cfg, &train_set)?;
        let val_rc = if val_set.is_empty() { None } else { Some(split_rc(&params, cfg, &val_set)?) };
        log.epochs.push(EpochRecord { epoch, lr, train_loss: loss_sum / train_set.len() as f64, train_rc, val_rc });
        match val_rc {
            Some(rc) if rc > best_rc => {
                best_rc = rc;
                best = params.clone();
                log.best_epoch = Some(epoch);
            }
            None => {
                best = params.clone();
                log.best_epoch = Some(epoch);
            }
            _ => {}
        }
        if opts.stop_at_train_rc.is_some_and(|t| train_rc >= t) {
            break;
        }
    }
    Ok(TrainOutcome { last: params, best, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig { frames: 2, height: 2, width: 2, feature_dim: 4, hidden_dim: 8, layers: 1, heads: 2, ..ModelConfig::default() }
    }

    fn dataset(c: &ModelConfig, n: usize) -> Vec<VideoSample<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..n)
            .map(|i| {
                let len = 3 * c.height * c.width * c.feature_dim;
                let data: Vec<f32> = (0..len).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
                VideoSample {
                    video_id: format!("v{i}"),
                    features: FeatureTensor::new(3, c.height, c.width, c.feature_dim, data).unwrap(),
                    text: None,
                    score: i as f64 / n as f64,
                    split: if i % 4 == 0 { Split::Val } else { Split::Train },
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_leaves_params_untouched() {
        let c = cfg();
        let p = ModelParams::<f32>::init(&c);
        let opts = TrainOptions { epochs: 2, adam: AdamConfig { lr: 0.0, ..AdamConfig::default() }, ..TrainOptions::default() };
        let out = train(p.clone(), &c, &dataset(&c, 8), &opts).unwrap();
        assert_eq!(out.last, p);
    }

    #[test]
    fn same_seed_same_log() {
        let c = cfg();
        let data = dataset(&c, 12);
        let opts = TrainOptions { epochs: 3, adam: AdamConfig { lr: 1e-3, ..AdamConfig::default() }, ..TrainOptions::default() };
        let a = train(ModelParams::<f32>::init(&c), &c, &data, &opts).unwrap();
        let b = train(ModelParams::<f32>::init(&c), &c, &data, &opts).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.last, b.last);
        assert_eq!(a.log.epochs.len(), 3);
        assert!(a.log.epochs.iter().all(|e| e.val_rc.is_some()));
    }

    #[test]
    fn empty_train_split_is_an_error() {
        let c = cfg();
        let mut data = dataset(&c, 4);
        data.iter_mut().for_each(|v| v.split = Split::Test);
        let r = train(ModelParams::<f32>::init(&c), &c, &data, &TrainOptions::default());
        assert!(matches!(r, Err(ModelError::EmptyTrainSplit)));
    }

    #[test]
    fn step_schedule_halves_every_ten_epochs() {
        let c = cfg();
        let data = dataset(&c, 4);
        let opts = TrainOptions { epochs: 21, batch_size: 8, ..TrainOptions::default() };
        let out = train(ModelParams::<f32>::init(&c), &c, &data, &opts).unwrap();
        let lrs: Vec<f64> = out.log.epochs.iter().map(|e| e.lr).collect();
        assert_eq!(lrs[9], 1e-5);
        assert_eq!(lrs[10], 5e-6);
        assert_eq!(lrs[20], 2.5e-6);
    }
}
