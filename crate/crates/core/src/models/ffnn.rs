//! Feed-forward network: tanh hidden layers, linear output, per-sample SGD
//! with validation-G checkpointing.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::params::{ensure, Reader};
use super::{internal_split, validation_g, Family, ModelError};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FfnnParams {
    pub hidden_layers: usize,
    pub nodes_per_layer: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
}

impl FfnnParams {
    pub fn from_params(params: &super::Params) -> Result<Self, ModelError> {
        let r = Reader::new(params, &["hidden_layers", "nodes_per_layer", "learning_rate", "max_epochs"])?;
        let p = FfnnParams {
            hidden_layers: r.usize("hidden_layers")?,
            nodes_per_layer: r.usize("nodes_per_layer")?,
            learning_rate: r.f64("learning_rate")?,
            max_epochs: r.usize("max_epochs")?,
        };
        ensure(p.hidden_layers >= 1, || "hidden_layers must be at least 1".into())?;
        ensure(p.nodes_per_layer >= 1, || "nodes_per_layer must be at least 1".into())?;
        ensure(p.learning_rate >= 0.0, || "learning_rate must be non-negative".into())?;
        Ok(p)
    }
}

/// Layer widths plus a flat parameter vector. Each layer stores its weight
/// matrix (outputs x inputs, row-major) followed by its biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FfnnModel {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl FfnnModel {
    pub fn zeros(sizes: Vec<usize>) -> Self {
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        FfnnModel { sizes, params: vec![0.0; n] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(sizes: Vec<usize>, seed: u64) -> Self {
        let mut m = Self::zeros(sizes);
        let mut rng = rng_from_seed(seed);
        let mut at = 0;
        for w in m.sizes.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut m.params[at..at + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            at += fan_in * fan_out + fan_out;
        }
        m
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Activations of every layer, input first, written into `acts`.
    fn forward_into(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize(self.sizes.len(), Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let mut at = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[at..at + n_in * n_out];
            let b = &self.params[at + n_in * n_out..at + n_in * n_out + n_out];
            let last = l + 1 == self.n_layers();
            let (head, tail) = acts.split_at_mut(l + 1);
            let (input, out) = (&head[l], &mut tail[0]);
            out.clear();
            out.extend((0..n_out).map(|o| {
                let z = b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, c)| a * c).sum::<f64>();
                if last {
                    z
                } else {
                    z.tanh()
                }
            }));
            at += n_in * n_out + n_out;
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut acts = Vec::new();
        self.forward_into(x, &mut acts);
        acts[self.n_layers()][0]
    }

    /// Adds the gradient of `0.5 (f(x) - y)^2` to `grad`; returns the loss.
    fn accumulate_gradient(&self, x: &[f64], y: f64, grad: &mut [f64], scratch: &mut Scratch) -> f64 {
        let Scratch { acts, delta, next } = scratch;
        self.forward_into(x, acts);
        let r = acts[self.n_layers()][0] - y;
        delta.clear();
        delta.push(r);
        let mut end = self.params.len();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let start = end - n_in * n_out - n_out;
            let input = &acts[l];
            for o in 0..n_out {
                let row = &mut grad[start + o * n_in..start + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += delta[o] * a;
                }
                grad[start + n_in * n_out + o] += delta[o];
            }
            if l > 0 {
                let w = &self.params[start..start + n_in * n_out];
                next.clear();
                next.extend((0..n_in).map(|i| {
                    let back: f64 = (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum();
                    back * (1.0 - input[i] * input[i])
                }));
                std::mem::swap(delta, next);
            }
            end = start;
        }
        0.5 * r * r
    }

    /// Mean loss over the rows of `x` and its gradient in the parameters.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut scratch = Scratch::default();
        for (row, &t) in x.rows_iter().zip(y) {
            loss += self.accumulate_gradient(row, t, &mut grad, &mut scratch);
        }
        let n = x.n_rows() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }
}

/// Reusable per-sample buffers.
#[derive(Default)]
struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

/// Returns the checkpointed network and the validation-G trajectory.
pub fn fit(params: &FfnnParams, x: &Matrix, y: &[f64], y_max: f64, seed: u64) -> Result<(FfnnModel, Vec<f64>), ModelError> {
    let (fit_rows, val_rows) = internal_split(x.n_rows(), derive_seed(seed, 0));
    let x_val = x.select_rows(&val_rows);
    let y_val: Vec<f64> = val_rows.iter().map(|&i| y[i]).collect();
    let mut sizes = vec![x.n_cols()];
    sizes.extend(std::iter::repeat_n(params.nodes_per_layer, params.hidden_layers));
    sizes.push(1);
    let mut net = FfnnModel::init(sizes, derive_seed(seed, 1));
    let mut rng = rng_from_seed(derive_seed(seed, 2));

    let mut scratch = Scratch::default();
    let val_g = |net: &FfnnModel, scratch: &mut Scratch| {
        let p: Vec<f64> = x_val
            .rows_iter()
            .map(|r| {
                net.forward_into(r, &mut scratch.acts);
                scratch.acts[net.n_layers()][0]
            })
            .collect();
        validation_g(&p, &y_val, y_max)
    };
    let mut best = net.clone();
    let mut best_g = val_g(&net, &mut scratch);
    let mut trajectory = Vec::with_capacity(params.max_epochs + 1);
    trajectory.push(best_g);
    let mut order = fit_rows.clone();
    let mut grad = vec![0.0; net.params.len()];
    for epoch in 1..=params.max_epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &i in &order {
            grad.iter_mut().for_each(|g| *g = 0.0);
            loss += net.accumulate_gradient(x.row(i), y[i], &mut grad, &mut scratch);
            for (p, g) in net.params.iter_mut().zip(&grad) {
                *p -= params.learning_rate * g;
            }
        }
        if !loss.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::Divergence {
                family: Family::Ffnn,
                epoch,
            });
        }
        let g = val_g(&net, &mut scratch);
        trajectory.push(g);
        if g > best_g {
            best_g = g;
            best.params.copy_from_slice(&net.params);
        }
    }
    Ok((best, trajectory))
}
