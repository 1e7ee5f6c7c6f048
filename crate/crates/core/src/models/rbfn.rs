//! Radial basis function network: Gaussian hidden units centred on a
//! silhouette-selected random-swap clustering, linear output layer trained
//! by full-batch gradient descent with validation-G checkpointing.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use serde::{Deserialize, Serialize};

use super::params::{ensure, Reader};
use super::{internal_split, validation_g, Family, ModelError};
use crate::clustering::{default_k_range, select_cluster_count};
use crate::matrix::{squared_distance, Matrix};
use crate::rng::{derive_seed, fnv1a};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RbfnParams {
    pub learning_rate: f64,
    pub gaussian_width: f64,
    pub max_epochs: usize,
}

impl RbfnParams {
    pub fn from_params(params: &super::Params) -> Result<Self, ModelError> {
        let r = Reader::new(params, &["learning_rate", "gaussian_width", "max_epochs"])?;
        let p = RbfnParams {
            learning_rate: r.f64("learning_rate")?,
            gaussian_width: r.f64("gaussian_width")?,
            max_epochs: r.usize("max_epochs")?,
        };
        ensure(p.learning_rate >= 0.0, || "learning_rate must be non-negative".into())?;
        ensure(p.gaussian_width > 0.0, || "gaussian_width must be positive".into())?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfnModel {
    pub centers: Matrix,
    pub width: f64,
    /// One weight per center followed by the bias.
    pub weights: Vec<f64>,
}

/// Hidden activations `exp(-|x - c|^2 / (2 width^2))` with a trailing bias
/// column of ones.
pub fn design_matrix(x: &Matrix, centers: &Matrix, width: f64) -> Matrix {
    let k = centers.n_rows();
    let denom = 2.0 * width * width;
    let mut phi = Matrix::zeros(x.n_rows(), k + 1);
    for i in 0..x.n_rows() {
        let row = phi.row_mut(i);
        for j in 0..k {
            row[j] = (-squared_distance(x.row(i), centers.row(j)) / denom).exp();
        }
        row[k] = 1.0;
    }
    phi
}

fn outputs(phi: &Matrix, w: &[f64]) -> Vec<f64> {
    phi.rows_iter().map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
}

/// Loss `0.5 * mean((phi w - y)^2)` and its gradient in `w`.
pub fn loss_and_gradient(phi: &Matrix, y: &[f64], w: &[f64]) -> (f64, Vec<f64>) {
    let n = phi.n_rows() as f64;
    let mut grad = vec![0.0; w.len()];
    let mut loss = 0.0;
    for (row, (&t, o)) in phi.rows_iter().zip(y.iter().zip(outputs(phi, w))) {
        let r = o - t;
        loss += 0.5 * r * r;
        for (g, a) in grad.iter_mut().zip(row) {
            *g += r * a;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

static CENTER_CACHE: LazyLock<Mutex<HashMap<u64, Arc<Matrix>>>> = LazyLock::new(Default::default);
const CENTER_CACHE_LIMIT: usize = 256;

/// Silhouette-selected centers for `points`; memoized on the exact bits of
/// the points and the seed, so repeated fits on one fold share the search.
pub fn select_centers(points: &Matrix, seed: u64) -> Result<Arc<Matrix>, ModelError> {
    let mut bytes = Vec::with_capacity(points.as_slice().len() * 8 + 24);
    for v in [points.n_rows() as u64, points.n_cols() as u64, seed] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in points.as_slice() {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    let key = fnv1a(&bytes);
    if let Some(c) = CENTER_CACHE.lock().unwrap().get(&key) {
        return Ok(Arc::clone(c));
    }
    let (k_min, k_max) = default_k_range(points.n_rows());
    if k_max > points.n_rows() || k_min > k_max {
        return Err(ModelError::InvalidData(format!(
            "RBFN needs at least 4 rows to choose centers, got {}",
            points.n_rows()
        )));
    }
    let (_, clustering) = select_cluster_count(points, k_min, k_max, seed)?;
    let centers = Arc::new(clustering.centers);
    let mut cache = CENTER_CACHE.lock().unwrap();
    if cache.len() >= CENTER_CACHE_LIMIT {
        cache.clear();
    }
    cache.insert(key, Arc::clone(&centers));
    Ok(centers)
}

/// Returns the checkpointed model and the validation-G trajectory (initial
/// weights first, then one entry per epoch).
pub fn fit(params: &RbfnParams, x: &Matrix, y: &[f64], y_max: f64, seed: u64) -> Result<(RbfnModel, Vec<f64>), ModelError> {
    let (fit_rows, val_rows) = internal_split(x.n_rows(), derive_seed(seed, 0));
    let x_fit = x.select_rows(&fit_rows);
    let centers = select_centers(&x_fit, derive_seed(seed, 1))?;
    let phi_fit = design_matrix(&x_fit, &centers, params.gaussian_width);
    let phi_val = design_matrix(&x.select_rows(&val_rows), &centers, params.gaussian_width);
    let y_fit: Vec<f64> = fit_rows.iter().map(|&i| y[i]).collect();
    let y_val: Vec<f64> = val_rows.iter().map(|&i| y[i]).collect();

    let mut w = vec![0.0; centers.n_rows() + 1];
    let mut best_w = w.clone();
    let mut best_g = validation_g(&outputs(&phi_val, &w), &y_val, y_max);
    let mut trajectory = Vec::with_capacity(params.max_epochs + 1);
    trajectory.push(best_g);
    for epoch in 1..=params.max_epochs {
        let (loss, grad) = loss_and_gradient(&phi_fit, &y_fit, &w);
        if !loss.is_finite() {
            return Err(ModelError::Divergence {
                family: Family::Rbfn,
                epoch,
            });
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= params.learning_rate * g;
        }
        let g = validation_g(&outputs(&phi_val, &w), &y_val, y_max);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Divergence {
                family: Family::Rbfn,
                epoch,
            });
        }
        trajectory.push(g);
        if g > best_g {
            best_g = g;
            best_w.copy_from_slice(&w);
        }
    }
    let model = RbfnModel {
        centers: (*centers).clone(),
        width: params.gaussian_width,
        weights: best_w,
    };
    Ok((model, trajectory))
}

impl RbfnModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let denom = 2.0 * self.width * self.width;
        let k = self.centers.n_rows();
        (0..k)
            .map(|j| self.weights[j] * (-squared_distance(x, self.centers.row(j)) / denom).exp())
            .sum::<f64>()
            + self.weights[k]
    }
}
