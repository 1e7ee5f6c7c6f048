//! Gradient boosting with depth-limited CART base learners.
//!
//! `F(x) = F0 + learning_rate * sum_t h_t(x)`; every stage fits a tree to
//! the negative loss gradient on a seeded row subsample. Under absolute loss
//! the leaves take the median raw residual of their rows.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::params::{ensure, Reader};
use super::tree::{mean_of, Tree, TreeBuilder};
use super::ModelError;
use crate::matrix::{median, Matrix};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Squared,
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbmParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub loss: Loss,
}

impl GbmParams {
    pub fn from_params(params: &super::Params) -> Result<Self, ModelError> {
        let r = Reader::new(
            params,
            &["n_trees", "max_depth", "min_samples_split", "learning_rate", "subsample", "loss"],
        )?;
        let loss = match r.text("loss")? {
            "squared" => Loss::Squared,
            "absolute" => Loss::Absolute,
            other => return Err(ModelError::InvalidParam(format!("unknown loss `{other}`"))),
        };
        let p = GbmParams {
            n_trees: r.usize("n_trees")?,
            max_depth: r.usize("max_depth")?,
            min_samples_split: r.usize("min_samples_split")?,
            learning_rate: r.f64("learning_rate")?,
            subsample: r.f64("subsample")?,
            loss,
        };
        ensure((0.0..=1.0).contains(&p.learning_rate), || "learning_rate must lie in [0, 1]".into())?;
        ensure(p.subsample > 0.0 && p.subsample <= 1.0, || "subsample must lie in (0, 1]".into())?;
        ensure(p.min_samples_split >= 2, || "min_samples_split must be at least 2".into())?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub f0: f64,
    pub learning_rate: f64,
    pub stages: Vec<Tree>,
    /// Summed SSE decrease of the fitted gradients per feature.
    pub importance: Vec<f64>,
}

impl GbmModel {
    pub fn stage_sum(&self, x: &[f64]) -> f64 {
        self.stages.iter().map(|t| t.predict_row(x)).sum()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.f0 + self.learning_rate * self.stage_sum(x)
    }
}

fn training_loss(loss: Loss, f: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    match loss {
        Loss::Squared => f.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n,
        Loss::Absolute => f.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / n,
    }
}

/// Returns the model and the training loss before and after every stage
/// (MSE for squared loss, MAE for absolute loss).
pub fn fit(params: &GbmParams, x: &Matrix, y: &[f64], seed: u64) -> (GbmModel, Vec<f64>) {
    let n = x.n_rows();
    let f0 = match params.loss {
        Loss::Squared => y.iter().sum::<f64>() / n as f64,
        Loss::Absolute => median(y),
    };
    let mut importance = vec![0.0; x.n_cols()];
    let mut sums = vec![0.0; n];
    let mut f = vec![f0; n];
    let mut losses = vec![training_loss(params.loss, &f, y)];
    let mut stages = Vec::with_capacity(params.n_trees);
    let m = ((params.subsample * n as f64).ceil() as usize).clamp(1, n);
    for t in 0..params.n_trees {
        let rows: Vec<usize> = if m < n {
            let mut r = sample(&mut rng_from_seed(derive_seed(seed, t as u64)), n, m).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let raw: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        let gradient: Vec<f64> = match params.loss {
            Loss::Squared => raw.clone(),
            Loss::Absolute => raw.iter().map(|&r| if r > 0.0 { 1.0 } else if r < 0.0 { -1.0 } else { 0.0 }).collect(),
        };
        let leaf = |rows: &[usize]| match params.loss {
            Loss::Squared => mean_of(&gradient, rows),
            Loss::Absolute => median(&rows.iter().map(|&i| raw[i]).collect::<Vec<_>>()),
        };
        let tree = cart(x, &gradient, rows, params.max_depth, params.min_samples_split, &leaf, &mut importance);
        for i in 0..n {
            sums[i] += tree.predict_row(x.row(i));
            f[i] = f0 + params.learning_rate * sums[i];
        }
        losses.push(training_loss(params.loss, &f, y));
        stages.push(tree);
    }
    let model = GbmModel {
        f0,
        learning_rate: params.learning_rate,
        stages,
        importance,
    };
    (model, losses)
}

/// Exhaustive variance-reduction CART on `rows` with leaves valued by
/// `leaf`. Nodes split only below `max_depth`, with at least
/// `min_samples_split` rows and a positive SSE decrease.
pub fn cart(
    x: &Matrix,
    target: &[f64],
    rows: Vec<usize>,
    max_depth: usize,
    min_samples_split: usize,
    leaf: &dyn Fn(&[usize]) -> f64,
    importance: &mut [f64],
) -> Tree {
    let mut b = TreeBuilder::new();
    grow(x, target, rows, 0, max_depth, min_samples_split, leaf, importance, &mut b);
    b.finish()
}

#[allow(clippy::too_many_arguments)]
fn grow(
    x: &Matrix,
    target: &[f64],
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_samples_split: usize,
    leaf: &dyn Fn(&[usize]) -> f64,
    importance: &mut [f64],
    b: &mut TreeBuilder,
) -> usize {
    if depth >= max_depth || rows.len() < min_samples_split {
        return b.leaf(leaf(&rows));
    }
    let Some((feature, threshold, gain)) = best_split(x, target, &rows) else {
        return b.leaf(leaf(&rows));
    };
    importance[feature] += gain;
    let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x.get(i, feature) <= threshold);
    let node = b.split(feature, threshold);
    let l = grow(x, target, left, depth + 1, max_depth, min_samples_split, leaf, importance, b);
    let r = grow(x, target, right, depth + 1, max_depth, min_samples_split, leaf, importance, b);
    b.link(node, l, r);
    node
}

fn best_split(x: &Matrix, target: &[f64], rows: &[usize]) -> Option<(usize, f64, f64)> {
    let n = rows.len() as f64;
    let total: f64 = rows.iter().map(|&i| target[i]).sum();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut sorted = rows.to_vec();
    for j in 0..x.n_cols() {
        sorted.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
        let mut left = 0.0;
        for k in 1..sorted.len() {
            left += target[sorted[k - 1]];
            let (lo, hi) = (x.get(sorted[k - 1], j), x.get(sorted[k], j));
            if lo == hi {
                continue;
            }
            let nl = k as f64;
            let nr = n - nl;
            let right = total - left;
            // SSE decrease of the split relative to the parent
            let gain = left * left / nl + right * right / nr - total * total / n;
            if gain > 1e-12 * (1.0 + total * total / n) && best.is_none_or(|(_, _, g)| gain > g) {
                let mid = 0.5 * (lo + hi);
                best = Some((j, if mid < hi { mid } else { lo }, gain));
            }
        }
    }
    best
}
