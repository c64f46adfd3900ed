use crate::io::Tensor;

use super::{Float, ModelError};

/// Backbone features of one video, row-major `frames x height x width x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor<F> {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub data: Vec<F>,
}

impl<F: Float> FeatureTensor<F> {
    pub fn new(frames: usize, height: usize, width: usize, dim: usize, data: Vec<F>) -> Result<Self, ModelError> {
        let expected = frames * height * width * dim;
        if data.len() != expected {
            return Err(ModelError::ShapeMismatch {
                expected: vec![expected],
                got: vec![data.len()],
            });
        }
        Ok(Self { frames, height, width, dim, data })
    }

    pub fn zeros(frames: usize, height: usize, width: usize, dim: usize) -> Self {
        Self {
            frames,
            height,
            width,
            dim,
            data: vec![F::zero(); frames * height * width * dim],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self, ModelError> {
        match *t.shape() {
            [f, h, w, d] => Self::new(f, h, w, d, F::from_tensor(t)),
            _ => Err(ModelError::ShapeMismatch {
                expected: vec![0, 0, 0, 0],
                got: t.shape().to_vec(),
            }),
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.frames, self.height, self.width, self.dim],
            F::into_tensor_data(self.data.clone()),
        )
        .expect("consistent feature tensor")
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.frames, self.height, self.width, self.dim]
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * self.dim
    }

    pub fn frame(&self, i: usize) -> &[F] {
        let n = self.frame_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn select_frames(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.frame_len());
        for &i in indices {
            data.extend_from_slice(self.frame(i));
        }
        Self { frames: indices.len(), data, ..*self }
    }

    /// Same frames in reverse order.
    pub fn reversed_frames(&self) -> Self {
        let idx: Vec<usize> = (0..self.frames).rev().collect();
        self.select_frames(&idx)
    }

    /// Mean over frames and cells, one value per channel.
    pub fn mean_pooled(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for token in self.data.chunks_exact(self.dim) {
            for (a, &v) in acc.iter_mut().zip(token) {
                *a += v.to_f64_lossy();
            }
        }
        let n = (self.data.len() / self.dim.max(1)).max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Precomputed caption token embeddings, row-major `count x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextTokens<F> {
    pub count: usize,
    pub dim: usize,
    pub data: Vec<F>,
}

impl<F: Float> TextTokens<F> {
    pub fn new(count: usize, dim: usize, data: Vec<F>) -> Result<Self, ModelError> {
        if data.len() != count * dim {
            return Err(ModelError::ShapeMismatch {
                expected: vec![count, dim],
                got: vec![data.len()],
            });
        }
        Ok(Self { count, dim, data })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self, ModelError> {
        match *t.shape() {
            [n, d] => Self::new(n, d, F::from_tensor(t)),
            _ => Err(ModelError::ShapeMismatch {
                expected: vec![0, 0],
                got: t.shape().to_vec(),
            }),
        }
    }
}
