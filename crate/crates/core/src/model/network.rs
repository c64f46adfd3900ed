use rayon::prelude::*;

use super::ops::{self, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward, LnCache};
use super::sampling::middle_frames;
use super::{FeatureTensor, Float, ModelConfig, ModelError, ModelParams, SpatialEmbedding, TextTokens};

/// Activations of one encoder block kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct LayerCache<F> {
    pub x_in: Vec<F>,
    pub ln1: LnCache<F>,
    pub qkv: Vec<F>,
    /// Pre-softmax scores, `heads x S x S`.
    pub logits: Vec<F>,
    /// Post-softmax attention, `heads x S x S`.
    pub probs: Vec<F>,
    pub att: Vec<F>,
    pub x_mid: Vec<F>,
    pub ln2: LnCache<F>,
    pub fc_pre: Vec<F>,
    pub fc_act: Vec<F>,
}

#[derive(Debug, Clone, Default)]
pub struct ForwardCache<F> {
    pub seq_len: usize,
    pub visual_tokens: usize,
    pub text_tokens: usize,
    /// Selected frame features, `THW x D`.
    input: Vec<F>,
    pub embedded: Vec<F>,
    ln_in: LnCache<F>,
    pub layers: Vec<LayerCache<F>>,
    /// Output of the last block, `S x d`.
    pub hidden: Vec<F>,
    cls_ln: LnCache<F>,
    head_pre: Vec<F>,
    head_act: Vec<F>,
    pub output: F,
}

impl<F: Float> ForwardCache<F> {
    /// LayerNormed CLS output fed to the regression head.
    pub fn cls_representation(&self) -> &[F] {
        &self.cls_ln.out
    }
}

/// One training example: exactly `T` frames plus its target score.
#[derive(Debug, Clone)]
pub struct Example<F> {
    pub features: FeatureTensor<F>,
    pub text: Option<TextTokens<F>>,
    pub target: f64,
}

fn check_inputs<F: Float>(
    cfg: &ModelConfig,
    features: &FeatureTensor<F>,
    text: Option<&TextTokens<F>>,
) -> Result<usize, ModelError> {
    let expected = [cfg.frames, cfg.height, cfg.width, cfg.feature_dim];
    if features.shape() != expected {
        return Err(ModelError::ShapeMismatch {
            expected: expected.to_vec(),
            got: features.shape().to_vec(),
        });
    }
    if !cfg.use_text {
        return Ok(0);
    }
    let text = text.ok_or(ModelError::MissingText)?;
    if text.dim != cfg.hidden_dim || text.count > cfg.max_text_tokens {
        return Err(ModelError::ShapeMismatch {
            expected: vec![cfg.max_text_tokens, cfg.hidden_dim],
            got: vec![text.count, text.dim],
        });
    }
    Ok(text.count)
}

fn spatial_rows<'a, F: Float>(cfg: &ModelConfig, params: &'a ModelParams<F>, j: usize) -> [Option<&'a [F]>; 2] {
    let d = cfg.hidden_dim;
    let row = |k: usize| Some(&params.spatial[k * d..(k + 1) * d]);
    match cfg.spatial_embedding {
        SpatialEmbedding::None => [None, None],
        SpatialEmbedding::Learned1d => [row(j), None],
        SpatialEmbedding::Learned2d => [row(j / cfg.width), row(cfg.height + j % cfg.width)],
    }
}

/// Runs the encoder on one video (exactly `T` frames) and returns the
/// predicted score with every activation needed for backward and attention.
pub fn forward<F: Float>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    features: &FeatureTensor<F>,
    text: Option<&TextTokens<F>>,
) -> Result<(F, ForwardCache<F>), ModelError> {
    cfg.validate()?;
    let n_text = check_inputs(cfg, features, text)?;
    let d = cfg.hidden_dim;
    let hw = cfg.spatial_tokens();
    let n_vis = cfg.visual_tokens();
    let s_len = 1 + n_vis + n_text;

    let mut emb = vec![F::zero(); s_len * d];
    emb[..d].copy_from_slice(&params.cls);
    linear(
        &features.data,
        n_vis,
        &params.proj_w,
        &params.proj_b,
        cfg.feature_dim,
        d,
        &mut emb[d..(1 + n_vis) * d],
    );
    let fourier = cfg.temporal_table::<F>();
    for i in 0..cfg.frames {
        let temporal = match &fourier {
            Some(t) => &t[i * d..(i + 1) * d],
            None => &params.temporal[i * d..(i + 1) * d],
        };
        for j in 0..hw {
            let row = &mut emb[(1 + i * hw + j) * d..(2 + i * hw + j) * d];
            ops::axpy(F::one(), temporal, row);
            for s in spatial_rows(cfg, params, j).into_iter().flatten() {
                ops::axpy(F::one(), s, row);
            }
            if cfg.use_text {
                ops::axpy(F::one(), &params.modality[..d], row);
            }
        }
    }
    if let (true, Some(text)) = (cfg.use_text, text) {
        for l in 0..n_text {
            let row = &mut emb[(1 + n_vis + l) * d..(2 + n_vis + l) * d];
            row.copy_from_slice(&text.data[l * d..(l + 1) * d]);
            ops::axpy(F::one(), &params.caption_pos[l * d..(l + 1) * d], row);
            ops::axpy(F::one(), &params.modality[d..2 * d], row);
        }
    }

    let ln_in = layer_norm(&emb, s_len, d, &params.ln_in_g, &params.ln_in_b);
    let mut x = ln_in.out.clone();
    let mut layers = Vec::with_capacity(cfg.layers);
    for lp in &params.layers {
        let (next, cache) = block_forward(cfg, lp, x, s_len);
        layers.push(cache);
        x = next;
    }

    let cls_ln = layer_norm(&x[..d], 1, d, &params.ln_out_g, &params.ln_out_b);
    let mut head_pre = vec![F::zero(); d];
    linear(&cls_ln.out, 1, &params.head_w1, &params.head_b1, d, d, &mut head_pre);
    let head_act: Vec<F> = head_pre.iter().map(|&v| gelu(v)).collect();
    let output = params.head_b2[0] + ops::dot(&params.head_w2, &head_act);

    let cache = ForwardCache {
        seq_len: s_len,
        visual_tokens: n_vis,
        text_tokens: n_text,
        input: features.data.clone(),
        embedded: emb,
        ln_in,
        layers,
        hidden: x,
        cls_ln,
        head_pre,
        head_act,
        output,
    };
    Ok((output, cache))
}

fn block_forward<F: Float>(
    cfg: &ModelConfig,
    lp: &super::LayerParams<F>,
    x_in: Vec<F>,
    s_len: usize,
) -> (Vec<F>, LayerCache<F>) {
    let d = cfg.hidden_dim;
    let heads = cfg.heads;
    let hd = cfg.head_dim();
    let scale = F::of(1.0 / (hd as f64).sqrt());

    let ln1 = layer_norm(&x_in, s_len, d, &lp.ln1_g, &lp.ln1_b);
    let mut qkv = vec![F::zero(); s_len * 3 * d];
    linear(&ln1.out, s_len, &lp.qkv_w, &lp.qkv_b, d, 3 * d, &mut qkv);

    let mut logits = vec![F::zero(); heads * s_len * s_len];
    let mut probs = vec![F::zero(); heads * s_len * s_len];
    let mut att = vec![F::zero(); s_len * d];
    let (mut q, mut k, mut v) = (vec![F::zero(); s_len * hd], vec![F::zero(); s_len * hd], vec![F::zero(); s_len * hd]);
    for h in 0..heads {
        gather_head(&qkv, s_len, d, h, hd, &mut q, &mut k, &mut v);
        for s in 0..s_len {
            let base = (h * s_len + s) * s_len;
            let qs = &q[s * hd..(s + 1) * hd];
            for t in 0..s_len {
                logits[base + t] = ops::dot(qs, &k[t * hd..(t + 1) * hd]) * scale;
            }
            let row = &mut probs[base..base + s_len];
            row.copy_from_slice(&logits[base..base + s_len]);
            ops::softmax(row);
            let out = &mut att[s * d + h * hd..s * d + (h + 1) * hd];
            for t in 0..s_len {
                ops::axpy(probs[base + t], &v[t * hd..(t + 1) * hd], out);
            }
        }
    }

    let mut x_mid = vec![F::zero(); s_len * d];
    linear(&att, s_len, &lp.out_w, &lp.out_b, d, d, &mut x_mid);
    for (m, &xi) in x_mid.iter_mut().zip(&x_in) {
        *m += xi;
    }

    let hdim = cfg.mlp_dim();
    let ln2 = layer_norm(&x_mid, s_len, d, &lp.ln2_g, &lp.ln2_b);
    let mut fc_pre = vec![F::zero(); s_len * hdim];
    linear(&ln2.out, s_len, &lp.fc1_w, &lp.fc1_b, d, hdim, &mut fc_pre);
    let fc_act: Vec<F> = fc_pre.iter().map(|&v| gelu(v)).collect();
    let mut x_out = vec![F::zero(); s_len * d];
    linear(&fc_act, s_len, &lp.fc2_w, &lp.fc2_b, hdim, d, &mut x_out);
    for (o, &m) in x_out.iter_mut().zip(&x_mid) {
        *o += m;
    }

    let cache = LayerCache { x_in, ln1, qkv, logits, probs, att, x_mid, ln2, fc_pre, fc_act };
    (x_out, cache)
}

#[allow(clippy::too_many_arguments)]
fn gather_head<F: Float>(qkv: &[F], s_len: usize, d: usize, h: usize, hd: usize, q: &mut [F], k: &mut [F], v: &mut [F]) {
    for s in 0..s_len {
        let row = &qkv[s * 3 * d..(s + 1) * 3 * d];
        q[s * hd..(s + 1) * hd].copy_from_slice(&row[h * hd..(h + 1) * hd]);
        k[s * hd..(s + 1) * hd].copy_from_slice(&row[d + h * hd..d + (h + 1) * hd]);
        v[s * hd..(s + 1) * hd].copy_from_slice(&row[2 * d + h * hd..2 * d + (h + 1) * hd]);
    }
}

/// Accumulates `d(output)/d(params) * dout` into `grads`.
pub(crate) fn backward<F: Float>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    cache: &ForwardCache<F>,
    dout: F,
    grads: &mut ModelParams<F>,
) {
    let d = cfg.hidden_dim;
    let s_len = cache.seq_len;

    // regression head
    grads.head_b2[0] += dout;
    ops::axpy(dout, &cache.head_act, &mut grads.head_w2);
    let d_pre: Vec<F> = (0..d)
        .map(|o| dout * params.head_w2[o] * gelu_grad(cache.head_pre[o]))
        .collect();
    let mut d_cls_ln = vec![F::zero(); d];
    linear_backward(
        &d_pre,
        &cache.cls_ln.out,
        1,
        &params.head_w1,
        d,
        d,
        &mut grads.head_w1,
        &mut grads.head_b1,
        Some(&mut d_cls_ln),
    );
    let mut dx = vec![F::zero(); s_len * d];
    layer_norm_backward(
        &d_cls_ln,
        &cache.cls_ln,
        1,
        d,
        &params.ln_out_g,
        &mut dx[..d],
        &mut grads.ln_out_g,
        &mut grads.ln_out_b,
    );

    for (l, lc) in cache.layers.iter().enumerate().rev() {
        dx = block_backward(cfg, &params.layers[l], lc, dx, s_len, &mut grads.layers[l]);
    }

    let mut d_emb = vec![F::zero(); s_len * d];
    layer_norm_backward(
        &dx,
        &cache.ln_in,
        s_len,
        d,
        &params.ln_in_g,
        &mut d_emb,
        &mut grads.ln_in_g,
        &mut grads.ln_in_b,
    );

    ops::axpy(F::one(), &d_emb[..d], &mut grads.cls);
    let n_vis = cache.visual_tokens;
    let hw = cfg.spatial_tokens();
    linear_backward(
        &d_emb[d..(1 + n_vis) * d],
        &cache.input,
        n_vis,
        &params.proj_w,
        cfg.feature_dim,
        d,
        &mut grads.proj_w,
        &mut grads.proj_b,
        None,
    );
    let learnable_t = !grads.temporal.is_empty();
    for i in 0..cfg.frames {
        for j in 0..hw {
            let g = &d_emb[(1 + i * hw + j) * d..(2 + i * hw + j) * d];
            if learnable_t {
                ops::axpy(F::one(), g, &mut grads.temporal[i * d..(i + 1) * d]);
            }
            match cfg.spatial_embedding {
                SpatialEmbedding::None => {}
                SpatialEmbedding::Learned1d => ops::axpy(F::one(), g, &mut grads.spatial[j * d..(j + 1) * d]),
                SpatialEmbedding::Learned2d => {
                    let (r, c) = (j / cfg.width, cfg.height + j % cfg.width);
                    ops::axpy(F::one(), g, &mut grads.spatial[r * d..(r + 1) * d]);
                    ops::axpy(F::one(), g, &mut grads.spatial[c * d..(c + 1) * d]);
                }
            }
            if cfg.use_text {
                ops::axpy(F::one(), g, &mut grads.modality[..d]);
            }
        }
    }
    for l in 0..cache.text_tokens {
        let g = &d_emb[(1 + n_vis + l) * d..(2 + n_vis + l) * d];
        ops::axpy(F::one(), g, &mut grads.caption_pos[l * d..(l + 1) * d]);
        ops::axpy(F::one(), g, &mut grads.modality[d..2 * d]);
    }
}

fn block_backward<F: Float>(
    cfg: &ModelConfig,
    lp: &super::LayerParams<F>,
    lc: &LayerCache<F>,
    d_out: Vec<F>,
    s_len: usize,
    g: &mut super::LayerParams<F>,
) -> Vec<F> {
    let d = cfg.hidden_dim;
    let hdim = cfg.mlp_dim();
    let heads = cfg.heads;
    let hd = cfg.head_dim();
    let scale = F::of(1.0 / (hd as f64).sqrt());

    // x_out = x_mid + fc2(gelu(fc1(ln2(x_mid))))
    let mut d_act = vec![F::zero(); s_len * hdim];
    linear_backward(&d_out, &lc.fc_act, s_len, &lp.fc2_w, hdim, d, &mut g.fc2_w, &mut g.fc2_b, Some(&mut d_act));
    for (da, &pre) in d_act.iter_mut().zip(&lc.fc_pre) {
        *da *= gelu_grad(pre);
    }
    let mut d_ln2 = vec![F::zero(); s_len * d];
    linear_backward(&d_act, &lc.ln2.out, s_len, &lp.fc1_w, d, hdim, &mut g.fc1_w, &mut g.fc1_b, Some(&mut d_ln2));
    let mut d_mid = d_out;
    layer_norm_backward(&d_ln2, &lc.ln2, s_len, d, &lp.ln2_g, &mut d_mid, &mut g.ln2_g, &mut g.ln2_b);

    // x_mid = x_in + out(attn(ln1(x_in)))
    let mut d_att = vec![F::zero(); s_len * d];
    linear_backward(&d_mid, &lc.att, s_len, &lp.out_w, d, d, &mut g.out_w, &mut g.out_b, Some(&mut d_att));

    let mut d_qkv = vec![F::zero(); s_len * 3 * d];
    let (mut q, mut k, mut v) = (vec![F::zero(); s_len * hd], vec![F::zero(); s_len * hd], vec![F::zero(); s_len * hd]);
    let (mut dq, mut dk, mut dv) = (vec![F::zero(); s_len * hd], vec![F::zero(); s_len * hd], vec![F::zero(); s_len * hd]);
    let mut dlogit = vec![F::zero(); s_len];
    for h in 0..heads {
        gather_head(&lc.qkv, s_len, d, h, hd, &mut q, &mut k, &mut v);
        dq.iter_mut().for_each(|x| *x = F::zero());
        dk.iter_mut().for_each(|x| *x = F::zero());
        dv.iter_mut().for_each(|x| *x = F::zero());
        for s in 0..s_len {
            let base = (h * s_len + s) * s_len;
            let p = &lc.probs[base..base + s_len];
            let dy = &d_att[s * d + h * hd..s * d + (h + 1) * hd];
            let mut weighted = F::zero();
            for t in 0..s_len {
                let dp = ops::dot(dy, &v[t * hd..(t + 1) * hd]);
                dlogit[t] = dp;
                weighted += p[t] * dp;
                ops::axpy(p[t], dy, &mut dv[t * hd..(t + 1) * hd]);
            }
            for t in 0..s_len {
                dlogit[t] = p[t] * (dlogit[t] - weighted) * scale;
            }
            let dqs = &mut dq[s * hd..(s + 1) * hd];
            for t in 0..s_len {
                ops::axpy(dlogit[t], &k[t * hd..(t + 1) * hd], dqs);
            }
            let qs = &q[s * hd..(s + 1) * hd];
            for t in 0..s_len {
                ops::axpy(dlogit[t], qs, &mut dk[t * hd..(t + 1) * hd]);
            }
        }
        for s in 0..s_len {
            let row = &mut d_qkv[s * 3 * d..(s + 1) * 3 * d];
            ops::axpy(F::one(), &dq[s * hd..(s + 1) * hd], &mut row[h * hd..(h + 1) * hd]);
            ops::axpy(F::one(), &dk[s * hd..(s + 1) * hd], &mut row[d + h * hd..d + (h + 1) * hd]);
            ops::axpy(F::one(), &dv[s * hd..(s + 1) * hd], &mut row[2 * d + h * hd..2 * d + (h + 1) * hd]);
        }
    }
    let mut d_ln1 = vec![F::zero(); s_len * d];
    linear_backward(&d_qkv, &lc.ln1.out, s_len, &lp.qkv_w, d, 3 * d, &mut g.qkv_w, &mut g.qkv_b, Some(&mut d_ln1));
    let mut d_in = d_mid;
    layer_norm_backward(&d_ln1, &lc.ln1, s_len, d, &lp.ln1_g, &mut d_in, &mut g.ln1_g, &mut g.ln1_b);
    d_in
}

/// Mean squared error over the batch and its gradient for every parameter tensor.
pub fn loss_and_grads<F: Float>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    batch: &[Example<F>],
) -> Result<(f64, ModelParams<F>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grads = ModelParams::zeros(cfg);
    let mut loss = 0.0;
    for ex in batch {
        let (pred, cache) = forward(params, cfg, &ex.features, ex.text.as_ref())?;
        let err = pred.to_f64_lossy() - ex.target;
        loss += err * err / n;
        backward(params, cfg, &cache, F::of(2.0 * err / n), &mut grads);
    }
    if !loss.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    Ok((loss, grads))
}

fn inference_frames<F: Float>(cfg: &ModelConfig, video: &FeatureTensor<F>) -> Result<FeatureTensor<F>, ModelError> {
    if video.frames == cfg.frames {
        return Ok(video.clone());
    }
    let idx = middle_frames(video.frames, cfg.frames)?;
    Ok(video.select_frames(&idx))
}

/// Score for one video; longer videos are reduced to `T` middle-of-segment frames.
pub fn predict<F: Float>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    video: &FeatureTensor<F>,
    text: Option<&TextTokens<F>>,
) -> Result<f64, ModelError> {
    let frames = inference_frames(cfg, video)?;
    Ok(forward(params, cfg, &frames, text)?.0.to_f64_lossy())
}

/// Pre-classifier CLS representation for one video.
pub fn cls_representation<F: Float>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    video: &FeatureTensor<F>,
    text: Option<&TextTokens<F>>,
) -> Result<Vec<f64>, ModelError> {
    let frames = inference_frames(cfg, video)?;
    let (_, cache) = forward(params, cfg, &frames, text)?;
    Ok(cache.cls_representation().iter().map(|v| v.to_f64_lossy()).collect())
}

/// Parallel `predict` over videos; results keep input order.
pub fn predict_batch<F: Float>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    videos: &[(FeatureTensor<F>, Option<TextTokens<F>>)],
) -> Result<Vec<f64>, ModelError> {
    videos
        .par_iter()
        .map(|(f, t)| predict(params, cfg, f, t.as_ref()))
        .collect()
}
