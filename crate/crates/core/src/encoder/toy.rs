//! A small trainable transformer encoder over hashed word forms.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::Sentence;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyEncoderConfig {
    pub vocab_hash_buckets: usize,
    pub dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        ToyEncoderConfig {
            vocab_hash_buckets: 2048,
            dim: 16,
            n_layers: 2,
            n_heads: 2,
        }
    }
}

impl ToyEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_hash_buckets == 0 || self.dim == 0 || self.n_heads == 0 {
            return Err(Error::Config(
                "buckets, dim and heads must be positive".into(),
            ));
        }
        if !self.dim.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "dim {} is not divisible by {} heads",
                self.dim, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.n_heads
    }
}

/// One transformer block: attention projections and a tanh feed-forward.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyLayer {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    /// `dim x 4*dim`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `4*dim x dim`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl ToyLayer {
    fn zeros(dim: usize) -> Self {
        ToyLayer {
            wq: Array2::zeros((dim, dim)),
            wk: Array2::zeros((dim, dim)),
            wv: Array2::zeros((dim, dim)),
            wo: Array2::zeros((dim, dim)),
            w1: Array2::zeros((dim, 4 * dim)),
            b1: Array1::zeros(4 * dim),
            w2: Array2::zeros((4 * dim, dim)),
            b2: Array1::zeros(dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyEncoderParams {
    config: ToyEncoderConfig,
    pub rng_seed: u64,
    /// `buckets x dim`
    pub embedding: Array2<f64>,
    pub layers: Vec<ToyLayer>,
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Fixed sinusoidal encoding of a 0-based position.
pub fn sinusoidal_position(pos: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            let k = (j / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * k / dim as f64);
            if j % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Final vectors and per-layer, per-head attention of one sentence.
#[derive(Clone, Debug)]
pub struct EncoderOutput {
    /// `n x dim`
    pub vectors: Array2<f64>,
    /// `[layer][head]`, each `n x n` and row-stochastic.
    pub attention: Vec<Vec<Array2<f64>>>,
}

impl EncoderOutput {
    /// Attention values in layer, head, query-row order.
    pub fn flat_attention(&self) -> Vec<f32> {
        self.attention
            .iter()
            .flatten()
            .flat_map(|a| a.iter().map(|&v| v as f32).collect::<Vec<_>>())
            .collect()
    }
}

struct LayerCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    z: Array2<f64>,
    mid: Array2<f64>,
    hidden: Array2<f64>,
}

/// Forward activations kept for backpropagation.
pub struct EncoderCache {
    buckets: Vec<usize>,
    layers: Vec<LayerCache>,
    output: EncoderOutput,
}

impl EncoderCache {
    pub fn output(&self) -> &EncoderOutput {
        &self.output
    }
}

impl ToyEncoderParams {
    /// Seeded initialization. Embeddings are uniform in [-1, 1]; projection
    /// matrices uniform in ±1/sqrt(fan_in); biases zero.
    pub fn init(config: ToyEncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.dim;
        let mut uniform = |rows: usize, cols: usize, scale: f64| {
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
        };
        let embedding = uniform(config.vocab_hash_buckets, d, 1.0);
        let a = 1.0 / (d as f64).sqrt();
        let f = 1.0 / (4.0 * d as f64).sqrt();
        let layers = (0..config.n_layers)
            .map(|_| ToyLayer {
                wq: uniform(d, d, a),
                wk: uniform(d, d, a),
                wv: uniform(d, d, a),
                wo: uniform(d, d, a),
                w1: uniform(d, 4 * d, a),
                b1: Array1::zeros(4 * d),
                w2: uniform(4 * d, d, f),
                b2: Array1::zeros(d),
            })
            .collect();
        Ok(ToyEncoderParams {
            config,
            rng_seed: seed,
            embedding,
            layers,
        })
    }

    /// All-zero parameters of the same shape, used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        let d = self.config.dim;
        ToyEncoderParams {
            config: self.config,
            rng_seed: self.rng_seed,
            embedding: Array2::zeros(self.embedding.raw_dim()),
            layers: (0..self.config.n_layers).map(|_| ToyLayer::zeros(d)).collect(),
        }
    }

    pub fn config(&self) -> ToyEncoderConfig {
        self.config
    }

    pub fn bucket(&self, form: &str) -> usize {
        (fnv1a(form.as_bytes()) % self.config.vocab_hash_buckets as u64) as usize
    }

    /// Tensors in checkpoint order: embedding, then per layer
    /// wq, wk, wv, wo, w1, b1, w2, b2.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.as_slice().unwrap()];
        for l in &self.layers {
            out.extend([
                l.wq.as_slice().unwrap(),
                l.wk.as_slice().unwrap(),
                l.wv.as_slice().unwrap(),
                l.wo.as_slice().unwrap(),
                l.w1.as_slice().unwrap(),
                l.b1.as_slice().unwrap(),
                l.w2.as_slice().unwrap(),
                l.b2.as_slice().unwrap(),
            ]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embedding.as_slice_mut().unwrap()];
        for l in &mut self.layers {
            out.extend([
                l.wq.as_slice_mut().unwrap(),
                l.wk.as_slice_mut().unwrap(),
                l.wv.as_slice_mut().unwrap(),
                l.wo.as_slice_mut().unwrap(),
                l.w1.as_slice_mut().unwrap(),
                l.b1.as_slice_mut().unwrap(),
                l.w2.as_slice_mut().unwrap(),
                l.b2.as_slice_mut().unwrap(),
            ]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Rebuilds parameters from tensors in [`tensors`](Self::tensors) order.
    pub fn from_tensors(config: ToyEncoderConfig, seed: u64, tensors: &[Vec<f64>]) -> Result<Self> {
        let mut p = ToyEncoderParams {
            config,
            rng_seed: seed,
            embedding: Array2::zeros((config.vocab_hash_buckets, config.dim)),
            layers: (0..config.n_layers).map(|_| ToyLayer::zeros(config.dim)).collect(),
        };
        config.validate()?;
        let mut slots = p.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} encoder tensors, found {}",
                slots.len(),
                tensors.len()
            )));
        }
        for (slot, t) in slots.iter_mut().zip(tensors) {
            if slot.len() != t.len() {
                return Err(Error::DimensionMismatch {
                    expected: slot.len(),
                    actual: t.len(),
                });
            }
            slot.copy_from_slice(t);
        }
        Ok(p)
    }

    fn input_rows(&self, buckets: &[usize]) -> Array2<f64> {
        let d = self.config.dim;
        let mut x = Array2::zeros((buckets.len(), d));
        for (i, &b) in buckets.iter().enumerate() {
            let pe = sinusoidal_position(i, d);
            for j in 0..d {
                x[[i, j]] = self.embedding[[b, j]] + pe[j];
            }
        }
        x
    }

    /// Forward pass; keeps activations for [`backward`](Self::backward).
    pub fn forward(&self, sentence: &Sentence) -> EncoderCache {
        let forms: Vec<&str> = sentence.tokens.iter().map(|t| t.form.as_str()).collect();
        self.forward_forms(&forms)
    }

    pub fn forward_forms(&self, forms: &[&str]) -> EncoderCache {
        let buckets: Vec<usize> = forms.iter().map(|f| self.bucket(f)).collect();
        let n = buckets.len();
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        let mut x = self.input_rows(&buckets);
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut attention = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let q = x.dot(&layer.wq);
            let k = x.dot(&layer.wk);
            let v = x.dot(&layer.wv);
            let mut z = Array2::zeros((n, self.config.dim));
            let mut attn = Vec::with_capacity(self.config.n_heads);
            for h in 0..self.config.n_heads {
                let cols = s![.., h * dh..(h + 1) * dh];
                let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
                softmax_rows(&mut scores);
                z.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
                attn.push(scores);
            }
            let mid = &x + &z.dot(&layer.wo);
            let mut hidden = mid.dot(&layer.w1) + &layer.b1;
            hidden.mapv_inplace(f64::tanh);
            let out = &mid + &hidden.dot(&layer.w2) + &layer.b2;
            attention.push(attn.clone());
            caches.push(LayerCache {
                input: x,
                q,
                k,
                v,
                attn,
                z,
                mid,
                hidden,
            });
            x = out;
        }
        EncoderCache {
            buckets,
            layers: caches,
            output: EncoderOutput {
                vectors: x,
                attention,
            },
        }
    }

    pub fn encode(&self, sentence: &Sentence) -> EncoderOutput {
        self.forward(sentence).output
    }

    /// Accumulates into `grads` the parameter gradient given the loss
    /// gradient with respect to the output vectors.
    pub fn backward(&self, cache: &EncoderCache, d_out: ArrayView2<f64>, grads: &mut ToyEncoderParams) {
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut g = d_out.to_owned();
        for (li, (layer, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let gl = &mut grads.layers[li];

            // out = mid + tanh(mid w1 + b1) w2 + b2
            gl.b2 += &g.sum_axis(Axis(0));
            gl.w2 += &c.hidden.t().dot(&g);
            let mut d_pre = g.dot(&layer.w2.t());
            Zip::from(&mut d_pre)
                .and(&c.hidden)
                .for_each(|d, &h| *d *= 1.0 - h * h);
            gl.w1 += &c.mid.t().dot(&d_pre);
            gl.b1 += &d_pre.sum_axis(Axis(0));
            let d_mid = g + d_pre.dot(&layer.w1.t());

            // mid = input + z wo
            gl.wo += &c.z.t().dot(&d_mid);
            let d_z = d_mid.dot(&layer.wo.t());
            let mut d_q = Array2::zeros(c.q.raw_dim());
            let mut d_k = Array2::zeros(c.k.raw_dim());
            let mut d_v = Array2::zeros(c.v.raw_dim());
            for (h, a) in c.attn.iter().enumerate() {
                let cols = s![.., h * dh..(h + 1) * dh];
                let d_zh = d_z.slice(cols);
                let d_a = d_zh.dot(&c.v.slice(cols).t());
                d_v.slice_mut(cols).assign(&a.t().dot(&d_zh));
                // softmax backward, row by row
                let row_dot = (&d_a * a).sum_axis(Axis(1)).insert_axis(Axis(1));
                let d_scores = a * &(&d_a - &row_dot) * scale;
                d_q.slice_mut(cols).assign(&d_scores.dot(&c.k.slice(cols)));
                d_k.slice_mut(cols).assign(&d_scores.t().dot(&c.q.slice(cols)));
            }
            gl.wq += &c.input.t().dot(&d_q);
            gl.wk += &c.input.t().dot(&d_k);
            gl.wv += &c.input.t().dot(&d_v);
            g = d_mid
                + d_q.dot(&layer.wq.t())
                + d_k.dot(&layer.wk.t())
                + d_v.dot(&layer.wv.t());
        }
        for (i, &b) in cache.buckets.iter().enumerate() {
            let mut row = grads.embedding.row_mut(b);
            row += &g.row(i);
        }
    }
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}
