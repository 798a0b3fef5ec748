//! Two-layer tanh MLP classifier over predicate vectors.

mod checkpoint;
mod train;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::taskdata::ClauseLabel;
use crate::{Error, Result};

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader};
pub use train::{
    train, EpochRecord, LabeledVector, Optimizer, PredicateRef, TrainConfig, TrainOutcome, TrainSet,
    TrainedModel,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeParams {
    /// `hidden x dim`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `2 x hidden`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeOutput {
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

impl ProbeParams {
    pub fn zeros(dim: usize, hidden_dim: usize) -> Self {
        ProbeParams {
            w1: Array2::zeros((hidden_dim, dim)),
            b1: Array1::zeros(hidden_dim),
            w2: Array2::zeros((2, hidden_dim)),
            b2: Array1::zeros(2),
        }
    }

    /// Weights uniform in ±1/sqrt(fan_in), biases zero.
    pub fn init(dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 || hidden_dim == 0 {
            return Err(Error::Config("probe dims must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = 1.0 / (dim as f64).sqrt();
        let b = 1.0 / (hidden_dim as f64).sqrt();
        let w1 = Array2::from_shape_fn((hidden_dim, dim), |_| rng.random_range(-a..a));
        let w2 = Array2::from_shape_fn((2, hidden_dim), |_| rng.random_range(-b..b));
        Ok(ProbeParams {
            w1,
            b1: Array1::zeros(hidden_dim),
            w2,
            b2: Array1::zeros(2),
        })
    }

    pub fn dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    /// Tensors in checkpoint order: w1, b1, w2, b2.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Array1<f64> {
        let mut h = self.w1.dot(&ArrayView1::from(x)) + &self.b1;
        h.mapv_inplace(f64::tanh);
        h
    }
}

fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

/// `logits = w2 tanh(w1 x + b1) + b2`, `probs = softmax(logits)`.
pub fn probe_forward(x: &[f64], p: &ProbeParams) -> Result<ProbeOutput> {
    p.check_input(x)?;
    let h = p.hidden(x);
    let l = p.w2.dot(&h) + &p.b2;
    let logits = [l[0], l[1]];
    Ok(ProbeOutput {
        logits,
        probs: softmax2(logits),
    })
}

/// Mean cross-entropy and its gradient; also returns the gradient with
/// respect to each input vector.
pub(crate) fn loss_grad_inputs(
    batch: &[(&[f64], ClauseLabel)],
    p: &ProbeParams,
) -> Result<(f64, ProbeParams, Vec<Array1<f64>>)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("loss batch"));
    }
    let n = batch.len() as f64;
    let mut grads = ProbeParams::zeros(p.dim(), p.hidden_dim());
    let mut d_inputs = Vec::with_capacity(batch.len());
    let mut loss = 0.0;
    for &(x, label) in batch {
        p.check_input(x)?;
        let h = p.hidden(x);
        let l = p.w2.dot(&h) + &p.b2;
        let m = l[0].max(l[1]);
        let lse = m + ((l[0] - m).exp() + (l[1] - m).exp()).ln();
        let gold = label.index();
        loss += lse - l[gold];

        let probs = softmax2([l[0], l[1]]);
        let mut d_logits = Array1::from(probs.to_vec());
        d_logits[gold] -= 1.0;
        d_logits /= n;

        for k in 0..2 {
            grads.b2[k] += d_logits[k];
            let mut row = grads.w2.row_mut(k);
            row.scaled_add(d_logits[k], &h);
        }
        let mut d_a = p.w2.t().dot(&d_logits);
        d_a.zip_mut_with(&h, |d, &hv| *d *= 1.0 - hv * hv);
        grads.b1 += &d_a;
        let xv = ArrayView1::from(x);
        for (i, &da) in d_a.iter().enumerate() {
            grads.w1.row_mut(i).scaled_add(da, &xv);
        }
        d_inputs.push(p.w1.t().dot(&d_a));
    }
    Ok((loss / n, grads, d_inputs))
}

/// Mean negative log-likelihood of the gold labels and its exact gradient.
pub fn loss_and_grad(batch: &[(&[f64], ClauseLabel)], p: &ProbeParams) -> Result<(f64, ProbeParams)> {
    loss_grad_inputs(batch, p).map(|(l, g, _)| (l, g))
}

/// Argmax label; exactly equal logits resolve to SUB.
pub fn predict_one(x: &[f64], p: &ProbeParams) -> Result<ClauseLabel> {
    let out = probe_forward(x, p)?;
    Ok(if out.logits[0] > out.logits[1] {
        ClauseLabel::Main
    } else {
        ClauseLabel::Sub
    })
}

pub fn predict<'a>(xs: impl IntoIterator<Item = &'a [f64]>, p: &ProbeParams) -> Result<Vec<ClauseLabel>> {
    xs.into_iter().map(|x| predict_one(x, p)).collect()
}
