//! Dense kernels with their reverse-mode counterparts. Activations are
//! row-major `[rows][features]`, weights row-major `[out][in]`.

use super::Float;

pub const LN_EPS: f64 = 1e-5;

#[inline]
pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn axpy<F: Float>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[r] = W x[r] + b`.
pub fn linear<F: Float>(x: &[F], rows: usize, w: &[F], b: &[F], in_dim: usize, out_dim: usize, out: &mut [F]) {
    debug_assert_eq!(x.len(), rows * in_dim);
    debug_assert_eq!(w.len(), out_dim * in_dim);
    for r in 0..rows {
        let xr = &x[r * in_dim..(r + 1) * in_dim];
        let or = &mut out[r * out_dim..(r + 1) * out_dim];
        for (o, slot) in or.iter_mut().enumerate() {
            *slot = b[o] + dot(&w[o * in_dim..(o + 1) * in_dim], xr);
        }
    }
}

/// Accumulates `dW`, `db` and (when given) `dx` for `linear`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward<F: Float>(
    dout: &[F],
    x: &[F],
    rows: usize,
    w: &[F],
    in_dim: usize,
    out_dim: usize,
    dw: &mut [F],
    db: &mut [F],
    mut dx: Option<&mut [F]>,
) {
    for r in 0..rows {
        let xr = &x[r * in_dim..(r + 1) * in_dim];
        let dr = &dout[r * out_dim..(r + 1) * out_dim];
        for (o, &g) in dr.iter().enumerate() {
            if g == F::zero() {
                continue;
            }
            db[o] += g;
            axpy(g, xr, &mut dw[o * in_dim..(o + 1) * in_dim]);
            if let Some(dx) = dx.as_deref_mut() {
                axpy(g, &w[o * in_dim..(o + 1) * in_dim], &mut dx[r * in_dim..(r + 1) * in_dim]);
            }
        }
    }
}

/// Per-row LayerNorm statistics and normalized (pre-affine) values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LnCache<F> {
    pub normalized: Vec<F>,
    pub rstd: Vec<F>,
    pub out: Vec<F>,
}

pub fn layer_norm<F: Float>(x: &[F], rows: usize, dim: usize, gain: &[F], bias: &[F]) -> LnCache<F> {
    let mut normalized = vec![F::zero(); rows * dim];
    let mut out = vec![F::zero(); rows * dim];
    let mut rstd = vec![F::zero(); rows];
    let n = F::of(dim as f64);
    for r in 0..rows {
        let xr = &x[r * dim..(r + 1) * dim];
        let mean = xr.iter().copied().sum::<F>() / n;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
        let rs = F::one() / (var + F::of(LN_EPS)).sqrt();
        rstd[r] = rs;
        for c in 0..dim {
            let y = (xr[c] - mean) * rs;
            normalized[r * dim + c] = y;
            out[r * dim + c] = y * gain[c] + bias[c];
        }
    }
    LnCache { normalized, rstd, out }
}

/// Backpropagates through `layer_norm`, adding into `dx`, `dgain`, `dbias`.
pub fn layer_norm_backward<F: Float>(
    dout: &[F],
    cache: &LnCache<F>,
    rows: usize,
    dim: usize,
    gain: &[F],
    dx: &mut [F],
    dgain: &mut [F],
    dbias: &mut [F],
) {
    let n = F::of(dim as f64);
    let mut dy = vec![F::zero(); dim];
    for r in 0..rows {
        let dr = &dout[r * dim..(r + 1) * dim];
        if dr.iter().all(|&g| g == F::zero()) {
            continue;
        }
        let yr = &cache.normalized[r * dim..(r + 1) * dim];
        let mut mean_dy = F::zero();
        let mut mean_dy_y = F::zero();
        for c in 0..dim {
            dgain[c] += dr[c] * yr[c];
            dbias[c] += dr[c];
            dy[c] = dr[c] * gain[c];
            mean_dy += dy[c];
            mean_dy_y += dy[c] * yr[c];
        }
        mean_dy /= n;
        mean_dy_y /= n;
        let rs = cache.rstd[r];
        for c in 0..dim {
            dx[r * dim + c] += rs * (dy[c] - mean_dy - yr[c] * mean_dy_y);
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// tanh-approximated GELU.
#[inline]
pub fn gelu<F: Float>(x: F) -> F {
    let u = F::of(GELU_C) * (x + F::of(GELU_A) * x * x * x);
    F::of(0.5) * x * (F::one() + u.tanh())
}

#[inline]
pub fn gelu_grad<F: Float>(x: F) -> F {
    let u = F::of(GELU_C) * (x + F::of(GELU_A) * x * x * x);
    let t = u.tanh();
    let du = F::of(GELU_C) * (F::one() + F::of(3.0 * GELU_A) * x * x);
    F::of(0.5) * (F::one() + t) + F::of(0.5) * x * (F::one() - t * t) * du
}

/// In-place numerically stable softmax.
pub fn softmax<F: Float>(row: &mut [F]) {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let mut total = F::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}
