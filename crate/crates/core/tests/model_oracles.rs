use attnmem_core::model::{
    extract_attention, forward, fourier_temporal_embeddings, loss_and_grads, predict, predict_batch, train, AdamConfig,
    Example, FeatureTensor, ModelConfig, ModelParams, SamplingMode, SpatialEmbedding, TemporalEmbedding, TextTokens,
    TrainOptions, VideoSample,
};
use attnmem_core::io::Split;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(text: bool) -> ModelConfig {
    ModelConfig {
        frames: 2,
        height: 2,
        width: 3,
        feature_dim: 5,
        hidden_dim: 8,
        layers: 2,
        heads: 2,
        mlp_ratio: 4,
        temporal_embedding: TemporalEmbedding::Learnable,
        spatial_embedding: SpatialEmbedding::Learned2d,
        use_text: text,
        max_text_tokens: if text { 3 } else { 0 },
        seed: 17,
    }
}

fn random_features(cfg: &ModelConfig, frames: usize, rng: &mut ChaCha8Rng) -> FeatureTensor<f64> {
    let n = frames * cfg.height * cfg.width * cfg.feature_dim;
    FeatureTensor::new(frames, cfg.height, cfg.width, cfg.feature_dim, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_text(cfg: &ModelConfig, count: usize, rng: &mut ChaCha8Rng) -> TextTokens<f64> {
    let d = cfg.hidden_dim;
    TextTokens::new(count, d, (0..count * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Perturbs every parameter so biases, gains and position tables are all
/// exercised away from their initial values.
fn jitter(params: &mut ModelParams<f64>, rng: &mut ChaCha8Rng, scale: f64) {
    for b in params.buffers_mut() {
        b.iter_mut().for_each(|v| *v += rng.random_range(-scale..scale));
    }
}

// ---- dense re-implementation -------------------------------------------------

fn mat(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, v)
}

fn row_layer_norm(x: &DMatrix<f64>, g: &[f64], b: &[f64]) -> DMatrix<f64> {
    let mut out = x.clone();
    for r in 0..x.nrows() {
        let row = x.row(r);
        let mean = row.mean();
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.ncols() as f64;
        for c in 0..x.ncols() {
            out[(r, c)] = (x[(r, c)] - mean) / (var + 1e-5).sqrt() * g[c] + b[c];
        }
    }
    out
}

fn affine(x: &DMatrix<f64>, w: &[f64], b: &[f64], out_dim: usize) -> DMatrix<f64> {
    let w = mat(out_dim, x.ncols(), w);
    let mut y = x * w.transpose();
    for mut row in y.row_iter_mut() {
        for c in 0..out_dim {
            row[c] += b[c];
        }
    }
    y
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

/// Straight-line forward pass; returns the score and the head-averaged
/// last-layer attention matrix.
fn dense_forward(p: &ModelParams<f64>, cfg: &ModelConfig, f: &FeatureTensor<f64>, text: Option<&TextTokens<f64>>) -> (f64, DMatrix<f64>) {
    let d = cfg.hidden_dim;
    let hw = cfg.height * cfg.width;
    let n_vis = cfg.frames * hw;
    let n_text = text.map_or(0, |t| t.count);
    let s = 1 + n_vis + n_text;
    let feats = mat(n_vis, cfg.feature_dim, &f.data);
    let proj = affine(&feats, &p.proj_w, &p.proj_b, d);
    let mut x = DMatrix::<f64>::zeros(s, d);
    for c in 0..d {
        x[(0, c)] = p.cls[c];
    }
    for i in 0..cfg.frames {
        for j in 0..hw {
            let t = 1 + i * hw + j;
            for c in 0..d {
                let temporal = match cfg.temporal_embedding {
                    TemporalEmbedding::Learnable => p.temporal[i * d + c],
                    TemporalEmbedding::Fourier => {
                        let freq = (i as f64) / 10000f64.powf((2 * (c / 2)) as f64 / d as f64);
                        if c % 2 == 0 { freq.sin() } else { freq.cos() }
                    }
                };
                let spatial = match cfg.spatial_embedding {
                    SpatialEmbedding::None => 0.0,
                    SpatialEmbedding::Learned1d => p.spatial[j * d + c],
                    SpatialEmbedding::Learned2d => p.spatial[(j / cfg.width) * d + c] + p.spatial[(cfg.height + j % cfg.width) * d + c],
                };
                let modality = if cfg.use_text { p.modality[c] } else { 0.0 };
                x[(t, c)] = proj[(i * hw + j, c)] + temporal + spatial + modality;
            }
        }
    }
    if let Some(text) = text {
        for l in 0..n_text {
            for c in 0..d {
                x[(1 + n_vis + l, c)] = text.data[l * d + c] + p.caption_pos[l * d + c] + p.modality[d + c];
            }
        }
    }
    let mut x = row_layer_norm(&x, &p.ln_in_g, &p.ln_in_b);
    let hd = d / cfg.heads;
    let mut last_attn = DMatrix::zeros(s, s);
    for lp in &p.layers {
        let h1 = row_layer_norm(&x, &lp.ln1_g, &lp.ln1_b);
        let qkv = affine(&h1, &lp.qkv_w, &lp.qkv_b, 3 * d);
        let mut att = DMatrix::<f64>::zeros(s, d);
        last_attn = DMatrix::zeros(s, s);
        for h in 0..cfg.heads {
            let q = qkv.columns(h * hd, hd).into_owned();
            let k = qkv.columns(d + h * hd, hd).into_owned();
            let v = qkv.columns(2 * d + h * hd, hd).into_owned();
            let mut scores = &q * k.transpose() / (hd as f64).sqrt();
            for mut row in scores.row_iter_mut() {
                let m = row.max();
                row.iter_mut().for_each(|e| *e = (*e - m).exp());
                let z = row.sum();
                row.iter_mut().for_each(|e| *e /= z);
            }
            last_attn += &scores / cfg.heads as f64;
            let o = &scores * v;
            att.columns_mut(h * hd, hd).copy_from(&o);
        }
        let mid = &x + affine(&att, &lp.out_w, &lp.out_b, d);
        let h2 = row_layer_norm(&mid, &lp.ln2_g, &lp.ln2_b);
        let hidden = affine(&h2, &lp.fc1_w, &lp.fc1_b, cfg.mlp_dim()).map(gelu);
        x = &mid + affine(&hidden, &lp.fc2_w, &lp.fc2_b, d);
    }
    let cls = row_layer_norm(&x.rows(0, 1).into_owned(), &p.ln_out_g, &p.ln_out_b);
    let h = affine(&cls, &p.head_w1, &p.head_b1, d).map(gelu);
    let w2 = DVector::from_row_slice(&p.head_w2);
    let out = (h.row(0) * w2)[(0, 0)] + p.head_b2[0];
    (out, last_attn)
}

#[test]
fn forward_matches_dense_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (text, temporal, spatial) in [
        (false, TemporalEmbedding::Learnable, SpatialEmbedding::Learned2d),
        (true, TemporalEmbedding::Fourier, SpatialEmbedding::Learned1d),
        (false, TemporalEmbedding::Fourier, SpatialEmbedding::None),
    ] {
        let cfg = ModelConfig { temporal_embedding: temporal, spatial_embedding: spatial, ..toy(text) };
        let mut params = ModelParams::<f64>::init(&cfg);
        jitter(&mut params, &mut rng, 0.3);
        let f = random_features(&cfg, cfg.frames, &mut rng);
        let t = text.then(|| random_text(&cfg, 2, &mut rng));
        let (out, cache) = forward(&params, &cfg, &f, t.as_ref()).unwrap();
        let (want, attn) = dense_forward(&params, &cfg, &f, t.as_ref());
        assert!((out - want).abs() < 1e-10, "{out} vs {want}");
        // alpha from the dense attention row
        let n_vis = cfg.visual_tokens();
        let row: Vec<f64> = (1..=n_vis).map(|j| attn[(0, j)]).collect();
        let total: f64 = row.iter().sum();
        let alpha = extract_attention(&cache, &cfg).unwrap().alpha;
        for (a, r) in alpha.iter().zip(&row) {
            assert!((a - r / total).abs() < 1e-10);
        }
    }
}

#[test]
fn desk_config_sequence_and_determinism() {
    let cfg = ModelConfig::default();
    let params = ModelParams::<f32>::init(&cfg);
    let zeros = FeatureTensor::<f32>::zeros(5, 7, 7, 64);
    let (a, cache) = forward(&params, &cfg, &zeros, None).unwrap();
    let (b, _) = forward(&params, &cfg, &zeros, None).unwrap();
    assert!(a.is_finite());
    assert_eq!(a, b);
    assert_eq!(cache.seq_len, 246);
    let bad = FeatureTensor::<f32>::zeros(5, 7, 6, 64);
    assert!(forward(&params, &cfg, &bad, None).is_err());
}

#[test]
fn fourier_table_formula() {
    let t = fourier_temporal_embeddings(5, 4).unwrap();
    for i in 0..5 {
        for k in 0..2 {
            let w = i as f64 / 10000f64.powf(2.0 * k as f64 / 4.0);
            assert!((t[i * 4 + 2 * k] - w.sin()).abs() < 1e-15);
            assert!((t[i * 4 + 2 * k + 1] - w.cos()).abs() < 1e-15);
        }
    }
    assert_eq!(&t[..4], &[0.0, 1.0, 0.0, 1.0]);
    let big = fourier_temporal_embeddings(64, 32).unwrap();
    assert!(big.iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!(fourier_temporal_embeddings(3, 5).is_err());
}

#[test]
fn alpha_is_softmax_of_logged_logits() {
    let cfg = ModelConfig { frames: 2, height: 2, width: 2, ..toy(false) };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut params = ModelParams::<f64>::init(&cfg);
    jitter(&mut params, &mut rng, 0.5);
    let f = random_features(&cfg, 2, &mut rng);
    let (_, cache) = forward(&params, &cfg, &f, None).unwrap();
    let s = cache.seq_len;
    let last = cache.layers.last().unwrap();
    let mut want = vec![0.0; 8];
    for h in 0..cfg.heads {
        let logits = &last.logits[h * s * s..h * s * s + s];
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        for j in 0..8 {
            want[j] += (logits[j + 1] - m).exp() / z / cfg.heads as f64;
        }
    }
    let total: f64 = want.iter().sum();
    let alpha = extract_attention(&cache, &cfg).unwrap();
    for (a, w) in alpha.alpha.iter().zip(&want) {
        assert!((a - w / total).abs() < 1e-12);
    }
    assert_eq!(alpha.frame_maps.len(), 2);
    assert_eq!(alpha.frame_maps[0].dims(), (224, 224));
    assert!((alpha.temporal[0] - alpha.alpha[..4].iter().sum::<f64>()).abs() < 1e-15);
}

#[test]
fn identical_tokens_give_uniform_alpha() {
    let cfg = toy(false);
    let mut params = ModelParams::<f64>::init(&cfg);
    params.zero_position_embeddings();
    let token: Vec<f64> = (0..5).map(|c| c as f64 * 0.3 - 0.4).collect();
    let data: Vec<f64> = token.iter().copied().cycle().take(2 * 6 * 5).collect();
    let f = FeatureTensor::new(2, 2, 3, 5, data).unwrap();
    let (_, cache) = forward(&params, &cfg, &f, None).unwrap();
    let alpha = extract_attention(&cache, &cfg).unwrap().alpha;
    assert!(alpha.iter().all(|a| (a - 1.0 / 12.0).abs() < 1e-12));
}

#[test]
fn text_tokens_are_excluded_from_alpha() {
    let cfg = toy(true);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = ModelParams::<f64>::init(&cfg);
    let f = random_features(&cfg, 2, &mut rng);
    let t = random_text(&cfg, 3, &mut rng);
    let (_, cache) = forward(&params, &cfg, &f, Some(&t)).unwrap();
    assert_eq!(cache.seq_len, 1 + 12 + 3);
    let alpha = extract_attention(&cache, &cfg).unwrap().alpha;
    assert_eq!(alpha.len(), 12);
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(forward(&params, &cfg, &f, None).is_err());
}

#[test]
fn loss_properties() {
    let cfg = toy(false);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = ModelParams::<f64>::init(&cfg);
    let f = random_features(&cfg, 2, &mut rng);
    let (pred, _) = forward(&params, &cfg, &f, None).unwrap();
    let exact = Example { features: f.clone(), text: None, target: pred };
    let (loss, grads) = loss_and_grads(&params, &cfg, std::slice::from_ref(&exact)).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(grads.head_b2[0], 0.0);
    let ex = Example { features: f, text: None, target: 0.3 };
    let (single, _) = loss_and_grads(&params, &cfg, std::slice::from_ref(&ex)).unwrap();
    let (double, _) = loss_and_grads(&params, &cfg, &[ex.clone(), ex]).unwrap();
    assert!((single - double).abs() < 1e-15);
    assert!(loss_and_grads(&params, &cfg, &[]).is_err());
}

fn batch_loss(params: &ModelParams<f64>, cfg: &ModelConfig, batch: &[Example<f64>]) -> f64 {
    loss_and_grads(params, cfg, batch).unwrap().0
}

#[test]
fn gradients_match_finite_differences_with_text() {
    let cfg = toy(true);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut params = ModelParams::<f64>::init(&cfg);
    jitter(&mut params, &mut rng, 0.2);
    let batch: Vec<Example<f64>> = (0..2)
        .map(|i| Example {
            features: random_features(&cfg, 2, &mut rng),
            text: Some(random_text(&cfg, 2 + i, &mut rng)),
            target: rng.random(),
        })
        .collect();
    let (_, grads) = loss_and_grads(&params, &cfg, &batch).unwrap();
    let names: Vec<String> = params.named(&cfg).into_iter().map(|t| t.name).collect();
    let h = 1e-5;
    for name in names {
        let analytic = grads.tensor(&cfg, &name).unwrap().to_vec();
        let mut numeric = vec![0.0; analytic.len()];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let mut plus = params.clone();
            plus.tensor_mut(&cfg, &name).unwrap()[k] += h;
            let mut minus = params.clone();
            minus.tensor_mut(&cfg, &name).unwrap()[k] -= h;
            *slot = (batch_loss(&plus, &cfg, &batch) - batch_loss(&minus, &cfg, &batch)) / (2.0 * h);
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        let rel = if scale == 0.0 { diff } else { diff / scale };
        assert!(rel <= 1e-6, "{name}: relative error {rel:e}");
    }
}

#[test]
fn prediction_is_stable_and_order_free() {
    let cfg = toy(false);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = ModelParams::<f64>::init(&cfg);
    let videos: Vec<(FeatureTensor<f64>, Option<TextTokens<f64>>)> =
        (0..5).map(|i| (random_features(&cfg, 2 + i, &mut rng), None)).collect();
    let a = predict_batch(&params, &cfg, &videos).unwrap();
    assert_eq!(predict(&params, &cfg, &videos[3].0, None).unwrap(), a[3]);
    let mut rev = videos.clone();
    rev.reverse();
    let b = predict_batch(&params, &cfg, &rev).unwrap();
    for i in 0..5 {
        assert_eq!(a[i], b[4 - i]);
    }
}

#[test]
fn single_video_overfits() {
    let cfg = ModelConfig { temporal_embedding: TemporalEmbedding::Fourier, spatial_embedding: SpatialEmbedding::None, ..toy(false) };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let features = random_features(&cfg, 2, &mut rng).data.iter().map(|&v| v as f32).collect();
    let sample = VideoSample {
        video_id: "only".into(),
        features: FeatureTensor::<f32>::new(2, 2, 3, 5, features).unwrap(),
        text: None,
        score: 0.73,
        split: Split::Train,
    };
    let opts = TrainOptions {
        epochs: 300,
        batch_size: 1,
        adam: AdamConfig { lr: 1e-2, ..AdamConfig::default() },
        schedule: None,
        sampling: SamplingMode::MiddleOfSegment,
        seed: 1,
        stop_at_train_rc: None,
    };
    let out = train(ModelParams::<f32>::init(&cfg), &cfg, std::slice::from_ref(&sample), &opts).unwrap();
    let pred = predict(&out.last, &cfg, &sample.features, None).unwrap();
    assert!((pred - 0.73).abs() <= 0.01, "{pred}");
}

fn permute_tokens(f: &FeatureTensor<f64>, perm: &[usize]) -> FeatureTensor<f64> {
    let dim = f.dim;
    let mut data = vec![0.0; f.data.len()];
    for (dst, &src) in perm.iter().enumerate() {
        data[dst * dim..(dst + 1) * dim].copy_from_slice(&f.data[src * dim..(src + 1) * dim]);
    }
    FeatureTensor::new(f.frames, f.height, f.width, dim, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn token_permutation_equivariance(seed in 0u64..10_000, perm in Just((0..12).collect::<Vec<usize>>()).prop_shuffle()) {
        let cfg = toy(false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::<f64>::init(&cfg);
        jitter(&mut params, &mut rng, 0.2);
        params.zero_position_embeddings();
        let f = random_features(&cfg, 2, &mut rng);
        let g = permute_tokens(&f, &perm);
        let (ya, ca) = forward(&params, &cfg, &f, None).unwrap();
        let (yb, cb) = forward(&params, &cfg, &g, None).unwrap();
        prop_assert!((ya - yb).abs() < 1e-5);
        let (aa, ab) = (extract_attention(&ca, &cfg).unwrap().alpha, extract_attention(&cb, &cfg).unwrap().alpha);
        for (dst, &src) in perm.iter().enumerate() {
            prop_assert!((ab[dst] - aa[src]).abs() < 1e-5);
        }
    }

    #[test]
    fn alpha_is_a_distribution(seed in 0u64..10_000) {
        let cfg = toy(false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::<f64>::init(&cfg);
        jitter(&mut params, &mut rng, 1.0);
        let (_, cache) = forward(&params, &cfg, &random_features(&cfg, 2, &mut rng), None).unwrap();
        let a = extract_attention(&cache, &cfg).unwrap();
        prop_assert!(a.alpha.iter().all(|&v| v >= 0.0));
        prop_assert!((a.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-5);
        prop_assert!((a.temporal.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }
}
