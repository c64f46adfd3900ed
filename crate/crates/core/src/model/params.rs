use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Float, ModelConfig, SpatialEmbedding, TemporalEmbedding};

/// Weights of one pre-LN encoder block. Matrices are row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub ln1_g: Vec<F>,
    pub ln1_b: Vec<F>,
    /// `3d x d`: query, key and value projections stacked.
    pub qkv_w: Vec<F>,
    pub qkv_b: Vec<F>,
    pub out_w: Vec<F>,
    pub out_b: Vec<F>,
    pub ln2_g: Vec<F>,
    pub ln2_b: Vec<F>,
    pub fc1_w: Vec<F>,
    pub fc1_b: Vec<F>,
    pub fc2_w: Vec<F>,
    pub fc2_b: Vec<F>,
}

/// All trainable tensors. The same type holds gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    /// `d x D` feature projection.
    pub proj_w: Vec<F>,
    pub proj_b: Vec<F>,
    /// `T x d`; empty when the temporal table is Fourier.
    pub temporal: Vec<F>,
    /// `HW x d` (1-D), `(H + W) x d` (2-D: rows then columns) or empty.
    pub spatial: Vec<F>,
    /// `N_text x d` caption positions; empty without text.
    pub caption_pos: Vec<F>,
    /// `2 x d`: row 0 visual, row 1 text; empty without text.
    pub modality: Vec<F>,
    pub cls: Vec<F>,
    pub ln_in_g: Vec<F>,
    pub ln_in_b: Vec<F>,
    pub layers: Vec<LayerParams<F>>,
    pub ln_out_g: Vec<F>,
    pub ln_out_b: Vec<F>,
    pub head_w1: Vec<F>,
    pub head_b1: Vec<F>,
    pub head_w2: Vec<F>,
    pub head_b2: Vec<F>,
}

enum Init {
    Zero,
    One,
    /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
    Uniform(usize),
    /// normal(0, 0.02)
    Embedding,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    ProjW,
    ProjB,
    Temporal,
    Spatial,
    Caption,
    Modality,
    Cls,
    LnInG,
    LnInB,
    Layer(usize, usize),
    LnOutG,
    LnOutB,
    HeadW1,
    HeadB1,
    HeadW2,
    HeadB2,
}

struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Init,
    slot: Slot,
}

const LAYER_TENSORS: [&str; 12] = [
    "ln1.gain",
    "ln1.bias",
    "attn.qkv.weight",
    "attn.qkv.bias",
    "attn.out.weight",
    "attn.out.bias",
    "ln2.gain",
    "ln2.bias",
    "mlp.fc1.weight",
    "mlp.fc1.bias",
    "mlp.fc2.weight",
    "mlp.fc2.bias",
];

fn specs(cfg: &ModelConfig) -> Vec<Spec> {
    let d = cfg.hidden_dim;
    let h = cfg.mlp_dim();
    let spec = |name: &str, shape: Vec<usize>, init, slot| Spec { name: name.to_string(), shape, init, slot };
    let mut out = vec![
        spec("proj.weight", vec![d, cfg.feature_dim], Init::Uniform(cfg.feature_dim), Slot::ProjW),
        spec("proj.bias", vec![d], Init::Zero, Slot::ProjB),
    ];
    if cfg.temporal_embedding == TemporalEmbedding::Learnable {
        out.push(spec("embed.temporal", vec![cfg.frames, d], Init::Embedding, Slot::Temporal));
    }
    match cfg.spatial_embedding {
        SpatialEmbedding::None => {}
        SpatialEmbedding::Learned1d => {
            out.push(spec("embed.spatial", vec![cfg.spatial_tokens(), d], Init::Embedding, Slot::Spatial))
        }
        SpatialEmbedding::Learned2d => {
            out.push(spec("embed.spatial", vec![cfg.height + cfg.width, d], Init::Embedding, Slot::Spatial))
        }
    }
    if cfg.use_text {
        out.push(spec("embed.caption", vec![cfg.max_text_tokens, d], Init::Embedding, Slot::Caption));
        out.push(spec("embed.modality", vec![2, d], Init::Embedding, Slot::Modality));
    }
    out.push(spec("cls", vec![d], Init::Embedding, Slot::Cls));
    out.push(spec("ln_in.gain", vec![d], Init::One, Slot::LnInG));
    out.push(spec("ln_in.bias", vec![d], Init::Zero, Slot::LnInB));
    for l in 0..cfg.layers {
        let shapes_inits: [(Vec<usize>, Init); 12] = [
            (vec![d], Init::One),
            (vec![d], Init::Zero),
            (vec![3 * d, d], Init::Uniform(d)),
            (vec![3 * d], Init::Zero),
            (vec![d, d], Init::Uniform(d)),
            (vec![d], Init::Zero),
            (vec![d], Init::One),
            (vec![d], Init::Zero),
            (vec![h, d], Init::Uniform(d)),
            (vec![h], Init::Zero),
            (vec![d, h], Init::Uniform(h)),
            (vec![d], Init::Zero),
        ];
        for (k, (shape, init)) in shapes_inits.into_iter().enumerate() {
            out.push(Spec {
                name: format!("layers.{l}.{}", LAYER_TENSORS[k]),
                shape,
                init,
                slot: Slot::Layer(l, k),
            });
        }
    }
    out.push(spec("ln_out.gain", vec![d], Init::One, Slot::LnOutG));
    out.push(spec("ln_out.bias", vec![d], Init::Zero, Slot::LnOutB));
    out.push(spec("head.fc1.weight", vec![d, d], Init::Uniform(d), Slot::HeadW1));
    out.push(spec("head.fc1.bias", vec![d], Init::Zero, Slot::HeadB1));
    out.push(spec("head.fc2.weight", vec![1, d], Init::Uniform(d), Slot::HeadW2));
    out.push(spec("head.fc2.bias", vec![1], Init::Zero, Slot::HeadB2));
    out
}

impl<F> LayerParams<F> {
    fn slot(&self, k: usize) -> &Vec<F> {
        [
            &self.ln1_g, &self.ln1_b, &self.qkv_w, &self.qkv_b, &self.out_w, &self.out_b,
            &self.ln2_g, &self.ln2_b, &self.fc1_w, &self.fc1_b, &self.fc2_w, &self.fc2_b,
        ][k]
    }

    fn slot_mut(&mut self, k: usize) -> &mut Vec<F> {
        match k {
            0 => &mut self.ln1_g,
            1 => &mut self.ln1_b,
            2 => &mut self.qkv_w,
            3 => &mut self.qkv_b,
            4 => &mut self.out_w,
            5 => &mut self.out_b,
            6 => &mut self.ln2_g,
            7 => &mut self.ln2_b,
            8 => &mut self.fc1_w,
            9 => &mut self.fc1_b,
            10 => &mut self.fc2_w,
            _ => &mut self.fc2_b,
        }
    }
}

/// Name, shape and values of one parameter tensor.
pub struct NamedTensor<'a, F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a [F],
}

impl<F: Float> ModelParams<F> {
    /// All tensors zero (gradient / moment buffers).
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let mut p = Self::empty(cfg.layers);
        for spec in specs(cfg) {
            *p.slot_mut(spec.slot) = vec![F::zero(); spec.shape.iter().product()];
        }
        p
    }

    /// Seeded initialization: weight matrices uniform in +-1/sqrt(fan_in),
    /// embeddings and CLS normal(0, 0.02), biases zero, LayerNorm gains one.
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, 0.02).expect("valid normal");
        let mut p = Self::empty(cfg.layers);
        for spec in specs(cfg) {
            let n: usize = spec.shape.iter().product();
            *p.slot_mut(spec.slot) = match spec.init {
                Init::Zero => vec![F::zero(); n],
                Init::One => vec![F::one(); n],
                Init::Uniform(fan_in) => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    (0..n).map(|_| F::of(rng.random_range(-bound..bound))).collect()
                }
                Init::Embedding => (0..n).map(|_| F::of(normal.sample(&mut rng))).collect(),
            };
        }
        p
    }

    fn empty(layers: usize) -> Self {
        let layer = || LayerParams {
            ln1_g: vec![],
            ln1_b: vec![],
            qkv_w: vec![],
            qkv_b: vec![],
            out_w: vec![],
            out_b: vec![],
            ln2_g: vec![],
            ln2_b: vec![],
            fc1_w: vec![],
            fc1_b: vec![],
            fc2_w: vec![],
            fc2_b: vec![],
        };
        Self {
            proj_w: vec![],
            proj_b: vec![],
            temporal: vec![],
            spatial: vec![],
            caption_pos: vec![],
            modality: vec![],
            cls: vec![],
            ln_in_g: vec![],
            ln_in_b: vec![],
            layers: (0..layers).map(|_| layer()).collect(),
            ln_out_g: vec![],
            ln_out_b: vec![],
            head_w1: vec![],
            head_b1: vec![],
            head_w2: vec![],
            head_b2: vec![],
        }
    }

    fn slot(&self, slot: Slot) -> &Vec<F> {
        match slot {
            Slot::ProjW => &self.proj_w,
            Slot::ProjB => &self.proj_b,
            Slot::Temporal => &self.temporal,
            Slot::Spatial => &self.spatial,
            Slot::Caption => &self.caption_pos,
            Slot::Modality => &self.modality,
            Slot::Cls => &self.cls,
            Slot::LnInG => &self.ln_in_g,
            Slot::LnInB => &self.ln_in_b,
            Slot::Layer(l, k) => self.layers[l].slot(k),
            Slot::LnOutG => &self.ln_out_g,
            Slot::LnOutB => &self.ln_out_b,
            Slot::HeadW1 => &self.head_w1,
            Slot::HeadB1 => &self.head_b1,
            Slot::HeadW2 => &self.head_w2,
            Slot::HeadB2 => &self.head_b2,
        }
    }

    fn slot_mut(&mut self, slot: Slot) -> &mut Vec<F> {
        match slot {
            Slot::ProjW => &mut self.proj_w,
            Slot::ProjB => &mut self.proj_b,
            Slot::Temporal => &mut self.temporal,
            Slot::Spatial => &mut self.spatial,
            Slot::Caption => &mut self.caption_pos,
            Slot::Modality => &mut self.modality,
            Slot::Cls => &mut self.cls,
            Slot::LnInG => &mut self.ln_in_g,
            Slot::LnInB => &mut self.ln_in_b,
            Slot::Layer(l, k) => self.layers[l].slot_mut(k),
            Slot::LnOutG => &mut self.ln_out_g,
            Slot::LnOutB => &mut self.ln_out_b,
            Slot::HeadW1 => &mut self.head_w1,
            Slot::HeadB1 => &mut self.head_b1,
            Slot::HeadW2 => &mut self.head_w2,
            Slot::HeadB2 => &mut self.head_b2,
        }
    }

    /// Every tensor the config allocates, in a fixed order.
    pub fn named(&self, cfg: &ModelConfig) -> Vec<NamedTensor<'_, F>> {
        specs(cfg)
            .into_iter()
            .map(|s| NamedTensor { values: self.slot(s.slot).as_slice(), name: s.name, shape: s.shape })
            .collect()
    }

    /// Mutable access to a tensor by its `named` name.
    pub fn tensor_mut(&mut self, cfg: &ModelConfig, name: &str) -> Option<&mut Vec<F>> {
        let slot = specs(cfg).into_iter().find(|s| s.name == name)?.slot;
        Some(self.slot_mut(slot))
    }

    pub fn tensor(&self, cfg: &ModelConfig, name: &str) -> Option<&[F]> {
        let slot = specs(cfg).into_iter().find(|s| s.name == name)?.slot;
        Some(self.slot(slot))
    }

    /// Every buffer, allocated or not, in a fixed order. Buffers of two
    /// params built from the same config line up pairwise.
    pub fn buffers(&self) -> Vec<&Vec<F>> {
        let mut out = vec![
            &self.proj_w, &self.proj_b, &self.temporal, &self.spatial, &self.caption_pos,
            &self.modality, &self.cls, &self.ln_in_g, &self.ln_in_b,
        ];
        for l in &self.layers {
            out.extend((0..LAYER_TENSORS.len()).map(|k| l.slot(k)));
        }
        out.extend([&self.ln_out_g, &self.ln_out_b, &self.head_w1, &self.head_b1, &self.head_w2, &self.head_b2]);
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<F>> {
        let Self {
            proj_w,
            proj_b,
            temporal,
            spatial,
            caption_pos,
            modality,
            cls,
            ln_in_g,
            ln_in_b,
            layers,
            ln_out_g,
            ln_out_b,
            head_w1,
            head_b1,
            head_w2,
            head_b2,
        } = self;
        let mut out: Vec<&mut Vec<F>> =
            vec![proj_w, proj_b, temporal, spatial, caption_pos, modality, cls, ln_in_g, ln_in_b];
        for l in layers.iter_mut() {
            let LayerParams {
                ln1_g,
                ln1_b,
                qkv_w,
                qkv_b,
                out_w,
                out_b,
                ln2_g,
                ln2_b,
                fc1_w,
                fc1_b,
                fc2_w,
                fc2_b,
            } = l;
            out.extend([ln1_g, ln1_b, qkv_w, qkv_b, out_w, out_b, ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b]);
        }
        out.extend([ln_out_g, ln_out_b, head_w1, head_b1, head_w2, head_b2]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.buffers().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// `self += alpha * other`, buffer by buffer.
    pub fn add_scaled(&mut self, other: &Self, alpha: F) {
        for (a, b) in self.buffers_mut().into_iter().zip(other.buffers()) {
            for (x, &y) in a.iter_mut().zip(b.iter()) {
                *x += alpha * y;
            }
        }
    }

    pub fn scale(&mut self, alpha: F) {
        for a in self.buffers_mut() {
            a.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    /// Zeroes the learned temporal and spatial position tables (Fourier tables are fixed).
    pub fn zero_position_embeddings(&mut self) {
        self.temporal.iter_mut().for_each(|x| *x = F::zero());
        self.spatial.iter_mut().for_each(|x| *x = F::zero());
    }

    pub fn cast<G: Float>(&self) -> ModelParams<G> {
        let mut out = ModelParams::<G>::empty(self.layers.len());
        for (dst, src) in out.buffers_mut().into_iter().zip(self.buffers()) {
            *dst = src.iter().map(|v| G::of(v.to_f64_lossy())).collect();
        }
        out
    }
}
