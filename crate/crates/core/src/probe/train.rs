use std::collections::HashMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_grad_inputs, predict_one, ProbeParams};
use crate::conllu::Sentence;
use crate::encoder::ToyEncoderParams;
use crate::taskdata::ClauseLabel;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub select_best_on_validation: bool,
    /// Backpropagate into the toy encoder. Ignored for frozen vectors.
    pub train_encoder: bool,
    /// Defaults to the input dimension.
    pub hidden_dim: Option<usize>,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::single_language()
    }
}

impl TrainConfig {
    /// Five epochs, best epoch on the validation set.
    pub fn single_language() -> Self {
        TrainConfig {
            epochs: 5,
            learning_rate: 1e-3,
            batch_size: 32,
            rng_seed: 0,
            select_best_on_validation: true,
            train_encoder: false,
            hidden_dim: None,
            optimizer: Optimizer::Sgd,
        }
    }

    /// Two epochs, final parameters.
    pub fn zero_shot() -> Self {
        TrainConfig {
            epochs: 2,
            select_best_on_validation: false,
            ..TrainConfig::single_language()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// A frozen predicate vector with its gold label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVector {
    pub x: Vec<f64>,
    pub label: ClauseLabel,
}

/// A predicate inside a sentence, encoded on the fly by the toy encoder.
#[derive(Clone, Copy, Debug)]
pub struct PredicateRef<'a> {
    pub sentence: &'a Sentence,
    /// 1-based token id.
    pub predicate: usize,
    pub label: ClauseLabel,
}

pub enum TrainSet<'a> {
    Vectors {
        train: &'a [LabeledVector],
        dev: &'a [LabeledVector],
    },
    Toy {
        encoder: ToyEncoderParams,
        train: &'a [PredicateRef<'a>],
        dev: &'a [PredicateRef<'a>],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's examples.
    pub train_loss: f64,
    pub dev_accuracy: Option<f64>,
}

/// A probe head, plus the toy encoder it reads from when there is one.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub probe: ProbeParams,
    pub encoder: Option<ToyEncoderParams>,
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        self.probe.dim()
    }

    /// Labels for predicates encoded with this model's toy encoder.
    pub fn predict_refs(&self, refs: &[PredicateRef<'_>]) -> Result<Vec<ClauseLabel>> {
        let encoder = self
            .encoder
            .as_ref()
            .ok_or_else(|| Error::Config("model has no toy encoder".into()))?;
        encode_refs(encoder, refs)
            .iter()
            .map(|x| predict_one(x, &self.probe))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch the returned parameters come from.
    pub best_epoch: usize,
}

/// Encodes each distinct sentence once and gathers predicate vectors.
pub(crate) fn encode_refs(encoder: &ToyEncoderParams, refs: &[PredicateRef<'_>]) -> Vec<Vec<f64>> {
    let mut cache: HashMap<*const Sentence, Array2<f64>> = HashMap::new();
    refs.iter()
        .map(|r| {
            let v = cache
                .entry(r.sentence as *const Sentence)
                .or_insert_with(|| encoder.encode(r.sentence).vectors);
            v.row(r.predicate - 1).to_vec()
        })
        .collect()
}

fn accuracy(xs: &[Vec<f64>], labels: impl Iterator<Item = ClauseLabel>, p: &ProbeParams) -> Result<f64> {
    let mut correct = 0usize;
    for (x, gold) in xs.iter().zip(labels) {
        if predict_one(x, p)? == gold {
            correct += 1;
        }
    }
    Ok(correct as f64 / xs.len() as f64)
}

struct OptState {
    kind: Optimizer,
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptState {
    fn new(kind: Optimizer, lr: f64, shapes: &[usize]) -> Self {
        let zeros = || shapes.iter().map(|&n| vec![0.0; n]).collect();
        OptState {
            kind,
            lr,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    fn apply(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        self.step += 1;
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (w, d) in p.iter_mut().zip(g) {
                        *w -= self.lr * d;
                    }
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for (ti, (p, g)) in params.into_iter().zip(grads).enumerate() {
                    let (m, v) = (&mut self.m[ti], &mut self.v[ti]);
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                    }
                }
            }
        }
    }
}

fn check_loss(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss { epoch, loss })
    }
}

/// Mini-batch training of the probe, jointly with the toy encoder when
/// `cfg.train_encoder` is set. Deterministic given `cfg.rng_seed`.
pub fn train(set: TrainSet<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    match set {
        TrainSet::Vectors { train, dev } => train_vectors(train, dev, cfg),
        TrainSet::Toy { encoder, train, dev } if !cfg.train_encoder => {
            let to_labeled = |refs: &[PredicateRef<'_>]| {
                encode_refs(&encoder, refs)
                    .into_iter()
                    .zip(refs)
                    .map(|(x, r)| LabeledVector { x, label: r.label })
                    .collect::<Vec<_>>()
            };
            let (tr, dv) = (to_labeled(train), to_labeled(dev));
            let mut out = train_vectors(&tr, &dv, cfg)?;
            out.model.encoder = Some(encoder);
            Ok(out)
        }
        TrainSet::Toy { encoder, train, dev } => train_joint(encoder, train, dev, cfg),
    }
}

fn check_sets(n_train: usize, n_dev: usize, cfg: &TrainConfig) -> Result<()> {
    if n_train == 0 {
        return Err(Error::EmptyInput("training set"));
    }
    if cfg.select_best_on_validation && n_dev == 0 {
        return Err(Error::EmptyInput("validation set (required for best-epoch selection)"));
    }
    Ok(())
}

fn rngs(seed: u64) -> (u64, ChaCha8Rng) {
    (seed, ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed))
}

fn train_vectors(train: &[LabeledVector], dev: &[LabeledVector], cfg: &TrainConfig) -> Result<TrainOutcome> {
    check_sets(train.len(), dev.len(), cfg)?;
    let dim = train[0].x.len();
    let (init_seed, mut shuffle_rng) = rngs(cfg.rng_seed);
    let mut probe = ProbeParams::init(dim, cfg.hidden_dim.unwrap_or(dim), init_seed)?;
    let shapes: Vec<usize> = probe.tensors().iter().map(|t| t.len()).collect();
    let mut opt = OptState::new(cfg.optimizer, cfg.learning_rate, &shapes);
    let dev_x: Vec<Vec<f64>> = dev.iter().map(|d| d.x.clone()).collect();

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ProbeParams)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut n_seen = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], ClauseLabel)> = chunk
                .iter()
                .map(|&i| (train[i].x.as_slice(), train[i].label))
                .collect();
            let (loss, grads, _) = loss_grad_inputs(&batch, &probe)?;
            check_loss(loss, epoch)?;
            loss_sum += loss * chunk.len() as f64;
            n_seen += chunk.len();
            opt.apply(probe.tensors_mut().into(), grads.tensors().into());
        }
        let dev_accuracy = if dev.is_empty() {
            None
        } else {
            Some(accuracy(&dev_x, dev.iter().map(|d| d.label), &probe)?)
        };
        log::debug!("epoch {} loss {:.5} dev {:?}", epoch, loss_sum / n_seen as f64, dev_accuracy);
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_seen as f64,
            dev_accuracy,
        });
        if cfg.select_best_on_validation {
            let acc = dev_accuracy.unwrap_or(0.0);
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, probe.clone()));
            }
        }
    }
    let (best_epoch, probe) = match best {
        Some((_, e, p)) => (e, p),
        None => (cfg.epochs, probe),
    };
    Ok(TrainOutcome {
        model: TrainedModel {
            probe,
            encoder: None,
        },
        history,
        best_epoch,
    })
}

fn train_joint(
    mut encoder: ToyEncoderParams,
    train: &[PredicateRef<'_>],
    dev: &[PredicateRef<'_>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    check_sets(train.len(), dev.len(), cfg)?;
    let dim = encoder.config().dim;
    let (init_seed, mut shuffle_rng) = rngs(cfg.rng_seed);
    let mut probe = ProbeParams::init(dim, cfg.hidden_dim.unwrap_or(dim), init_seed)?;
    let shapes: Vec<usize> = probe
        .tensors()
        .iter()
        .map(|t| t.len())
        .chain(encoder.tensors().iter().map(|t| t.len()))
        .collect();
    let mut opt = OptState::new(cfg.optimizer, cfg.learning_rate, &shapes);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ProbeParams, ToyEncoderParams)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut n_seen = 0;
        for chunk in order.chunks(cfg.batch_size) {
            // One forward pass per distinct sentence, in first-seen order.
            let mut groups: Vec<(&Sentence, Vec<usize>)> = Vec::new();
            for &i in chunk {
                let s = train[i].sentence;
                match groups.iter_mut().find(|(g, _)| std::ptr::eq(*g, s)) {
                    Some((_, members)) => members.push(i),
                    None => groups.push((s, vec![i])),
                }
            }
            let caches: Vec<_> = groups.iter().map(|(s, _)| encoder.forward(s)).collect();
            let xs: Vec<Vec<f64>> = groups
                .iter()
                .zip(&caches)
                .flat_map(|((_, members), c)| {
                    members
                        .iter()
                        .map(|&i| c.output().vectors.row(train[i].predicate - 1).to_vec())
                })
                .collect();
            let labels = groups
                .iter()
                .flat_map(|(_, members)| members.iter().map(|&i| train[i].label));
            let batch: Vec<(&[f64], ClauseLabel)> =
                xs.iter().map(Vec::as_slice).zip(labels).collect();
            let (loss, probe_grads, d_inputs) = loss_grad_inputs(&batch, &probe)?;
            check_loss(loss, epoch)?;
            loss_sum += loss * chunk.len() as f64;
            n_seen += chunk.len();

            let mut enc_grads = encoder.zeros_like();
            let mut k = 0;
            for ((_, members), cache) in groups.iter().zip(&caches) {
                let mut d_out = Array2::zeros(cache.output().vectors.raw_dim());
                for &i in members {
                    let mut row = d_out.row_mut(train[i].predicate - 1);
                    row += &d_inputs[k];
                    k += 1;
                }
                encoder.backward(cache, d_out.view(), &mut enc_grads);
            }

            let params: Vec<&mut [f64]> = probe
                .tensors_mut()
                .into_iter()
                .chain(encoder.tensors_mut())
                .collect();
            let grads: Vec<&[f64]> = probe_grads
                .tensors()
                .into_iter()
                .chain(enc_grads.tensors())
                .collect();
            opt.apply(params, grads);
        }
        let dev_accuracy = if dev.is_empty() {
            None
        } else {
            let xs = encode_refs(&encoder, dev);
            Some(accuracy(&xs, dev.iter().map(|r| r.label), &probe)?)
        };
        log::debug!("epoch {} loss {:.5} dev {:?}", epoch, loss_sum / n_seen as f64, dev_accuracy);
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_seen as f64,
            dev_accuracy,
        });
        if cfg.select_best_on_validation {
            let acc = dev_accuracy.unwrap_or(0.0);
            if best.as_ref().is_none_or(|(b, ..)| acc > *b) {
                best = Some((acc, epoch, probe.clone(), encoder.clone()));
            }
        }
    }
    let (best_epoch, probe, encoder) = match best {
        Some((_, e, p, enc)) => (e, p, enc),
        None => (cfg.epochs, probe, encoder),
    };
    Ok(TrainOutcome {
        model: TrainedModel {
            probe,
            encoder: Some(encoder),
        },
        history,
        best_epoch,
    })
}
