//! Small classifiers with closed-form gradients: multinomial logistic
//! regression and a one-hidden-layer tanh MLP. Big backbones are out of
//! scope here; the round mechanics are architecture-agnostic and these two
//! train in microseconds on blob-sized shards.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::aggregation::{Layout, ModelParams};
use crate::rng::substream;
use crate::sim::data::Dataset;

/// Model architecture plus its parameter layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelArch {
    Logistic { dim: usize, classes: usize },
    Mlp { dim: usize, hidden: usize, classes: usize },
}

impl ModelArch {
    pub fn layout(&self) -> Arc<Layout> {
        match *self {
            ModelArch::Logistic { dim, classes } => Arc::new(Layout::new(vec![
                ("w".into(), classes * dim),
                ("b".into(), classes),
            ])),
            ModelArch::Mlp { dim, hidden, classes } => Arc::new(Layout::new(vec![
                ("w1".into(), hidden * dim),
                ("b1".into(), hidden),
                ("w2".into(), classes * hidden),
                ("b2".into(), classes),
            ])),
        }
    }

    /// The classifier head; its rows are per-class directions, which is
    /// what the cosine-weighted aggregator compares.
    pub fn head_segment(&self) -> &'static str {
        match self {
            ModelArch::Logistic { .. } => "w",
            ModelArch::Mlp { .. } => "w2",
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            ModelArch::Logistic { classes, .. } | ModelArch::Mlp { classes, .. } => classes,
        }
    }

    /// Input width of the classifier head.
    pub fn head_width(&self) -> usize {
        match *self {
            ModelArch::Logistic { dim, .. } => dim,
            ModelArch::Mlp { hidden, .. } => hidden,
        }
    }

    /// Deterministic initial parameters. The convex logistic model starts
    /// at zero; the MLP needs symmetry breaking and draws small uniform
    /// weights from the seed.
    pub fn init_params(&self, seed: u64) -> ModelParams {
        let layout = self.layout();
        match *self {
            ModelArch::Logistic { .. } => ModelParams::zeros(layout),
            ModelArch::Mlp { dim, hidden, classes } => {
                let mut rng = substream(seed, 0x4d4c50);
                let mut values = Vec::with_capacity(layout.total_len());
                let a1 = 1.0 / (dim as f64).sqrt();
                values.extend((0..hidden * dim).map(|_| rng.random_range(-a1..a1)));
                values.extend(std::iter::repeat_n(0.0, hidden));
                let a2 = 1.0 / (hidden as f64).sqrt();
                values.extend((0..classes * hidden).map(|_| rng.random_range(-a2..a2)));
                values.extend(std::iter::repeat_n(0.0, classes));
                ModelParams::new(layout, values)
            }
        }
    }

    fn logits(&self, params: &ModelParams, x: &[f64]) -> Vec<f64> {
        match *self {
            ModelArch::Logistic { dim, classes } => {
                let w = params.segment("w").expect("layout has w");
                let b = params.segment("b").expect("layout has b");
                (0..classes)
                    .map(|c| b[c] + dot(&w[c * dim..(c + 1) * dim], x))
                    .collect()
            }
            ModelArch::Mlp { dim, hidden, classes } => {
                let h = self.hidden_activations(params, x);
                let w2 = params.segment("w2").expect("layout has w2");
                let b2 = params.segment("b2").expect("layout has b2");
                let _ = dim;
                (0..classes)
                    .map(|c| b2[c] + dot(&w2[c * hidden..(c + 1) * hidden], &h))
                    .collect()
            }
        }
    }

    fn hidden_activations(&self, params: &ModelParams, x: &[f64]) -> Vec<f64> {
        match *self {
            ModelArch::Mlp { dim, hidden, .. } => {
                let w1 = params.segment("w1").expect("layout has w1");
                let b1 = params.segment("b1").expect("layout has b1");
                (0..hidden)
                    .map(|h| (b1[h] + dot(&w1[h * dim..(h + 1) * dim], x)).tanh())
                    .collect()
            }
            ModelArch::Logistic { .. } => unreachable!("logistic model has no hidden layer"),
        }
    }

    pub fn predict(&self, params: &ModelParams, x: &[f64]) -> usize {
        argmax(&self.logits(params, x))
    }

    /// Classification accuracy over the given examples.
    pub fn accuracy(&self, params: &ModelParams, data: &Dataset, indices: &[usize]) -> f64 {
        if indices.is_empty() {
            return 0.0;
        }
        let correct = indices
            .iter()
            .filter(|&&i| self.predict(params, data.features_of(i)) == data.label(i))
            .count();
        correct as f64 / indices.len() as f64
    }

    /// Mean cross-entropy over the given examples.
    pub fn loss(&self, params: &ModelParams, data: &Dataset, indices: &[usize]) -> f64 {
        if indices.is_empty() {
            return 0.0;
        }
        let total: f64 = indices
            .iter()
            .map(|&i| {
                let log_p = log_softmax(&self.logits(params, data.features_of(i)));
                -log_p[data.label(i)]
            })
            .sum();
        total / indices.len() as f64
    }

    /// Mean cross-entropy gradient over a batch, flat in layout order.
    pub fn grad_batch(&self, params: &ModelParams, data: &Dataset, indices: &[usize]) -> Vec<f64> {
        let mut grad = vec![0.0f64; params.values().len()];
        if indices.is_empty() {
            return grad;
        }
        for &i in indices {
            self.accumulate_example_grad(params, data.features_of(i), data.label(i), &mut grad);
        }
        let scale = 1.0 / indices.len() as f64;
        for g in &mut grad {
            *g *= scale;
        }
        grad
    }

    fn accumulate_example_grad(
        &self,
        params: &ModelParams,
        x: &[f64],
        y: usize,
        grad: &mut [f64],
    ) {
        match *self {
            ModelArch::Logistic { dim, classes } => {
                let mut dz = softmax(&self.logits(params, x));
                dz[y] -= 1.0;
                let (gw, gb) = grad.split_at_mut(classes * dim);
                for c in 0..classes {
                    for d in 0..dim {
                        gw[c * dim + d] += dz[c] * x[d];
                    }
                    gb[c] += dz[c];
                }
            }
            ModelArch::Mlp { dim, hidden, classes } => {
                let h = self.hidden_activations(params, x);
                let w2 = params.segment("w2").expect("layout has w2");
                let mut dz2 = {
                    let b2 = params.segment("b2").expect("layout has b2");
                    let logits: Vec<f64> = (0..classes)
                        .map(|c| b2[c] + dot(&w2[c * hidden..(c + 1) * hidden], &h))
                        .collect();
                    softmax(&logits)
                };
                dz2[y] -= 1.0;
                // back through the head
                let (g1, rest) = grad.split_at_mut(hidden * dim);
                let (gb1, rest) = rest.split_at_mut(hidden);
                let (gw2, gb2) = rest.split_at_mut(classes * hidden);
                let mut dh = vec![0.0f64; hidden];
                for c in 0..classes {
                    for k in 0..hidden {
                        gw2[c * hidden + k] += dz2[c] * h[k];
                        dh[k] += w2[c * hidden + k] * dz2[c];
                    }
                    gb2[c] += dz2[c];
                }
                // back through tanh
                for k in 0..hidden {
                    let da = dh[k] * (1.0 - h[k] * h[k]);
                    for d in 0..dim {
                        g1[k * dim + d] += da * x[d];
                    }
                    gb1[k] += da;
                }
            }
        }
    }
}

/// Outcome of one client's local pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFit {
    pub params: ModelParams,
    /// Set when the shard was empty and the model came back untouched.
    pub empty_shard: bool,
}

/// Mini-batch SGD on cross-entropy, deterministic given the seed.
#[allow(clippy::too_many_arguments)]
pub fn local_train(
    arch: ModelArch,
    start: &ModelParams,
    data: &Dataset,
    shard: &[usize],
    epochs: usize,
    lr: f64,
    batch: usize,
    seed: u64,
) -> LocalFit {
    if shard.is_empty() {
        return LocalFit { params: start.clone(), empty_shard: true };
    }
    let batch = batch.max(1);
    let mut params = start.clone();
    for epoch in 0..epochs {
        let mut order = shard.to_vec();
        order.shuffle(&mut substream(seed, epoch as u64));
        for chunk in order.chunks(batch) {
            let grad = arch.grad_batch(&params, data, chunk);
            for (p, g) in params.values_mut().iter_mut().zip(&grad) {
                *p -= lr * g;
            }
        }
    }
    LocalFit { params, empty_shard: false }
}

/// Central finite differences of the mean cross-entropy, the independent
/// check for the analytic gradients.
#[allow(clippy::needless_range_loop)] // the index drives probe and grad together
pub fn finite_difference_gradient(
    arch: ModelArch,
    params: &ModelParams,
    data: &Dataset,
    indices: &[usize],
    step: f64,
) -> Vec<f64> {
    let mut probe = params.clone();
    let mut grad = vec![0.0f64; params.values().len()];
    for i in 0..grad.len() {
        let original = probe.values()[i];
        probe.values_mut()[i] = original + step;
        let plus = arch.loss(&probe, data, indices);
        probe.values_mut()[i] = original - step;
        let minus = arch.loss(&probe, data, indices);
        probe.values_mut()[i] = original;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        if x > best_val {
            best = i;
            best_val = x;
        }
    }
    best
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total: f64 = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - max - log_total).collect()
}

/// Seeded generator for random parameter points, used by the gradient
/// checks.
pub fn random_params(arch: ModelArch, seed: u64, scale: f64) -> ModelParams {
    let layout = arch.layout();
    let mut rng = substream(seed, 0x50_41_52);
    let len = layout.total_len();
    let values = (0..len).map(|_| rng.random_range(-scale..scale)).collect();
    ModelParams::new(layout, values)
}
