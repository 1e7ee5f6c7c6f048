//! Naive Bayes regression: the target range is cut into equal-width bins
//! that act as classes, and a prediction is the midpoint of the most
//! probable bin under Gaussian class-conditional likelihoods.

use serde::{Deserialize, Serialize};

use super::params::{ensure, Reader};
use super::ModelError;
use crate::matrix::Matrix;

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NbParams {
    pub n_bins: usize,
}

impl NbParams {
    pub fn from_params(params: &super::Params) -> Result<Self, ModelError> {
        let r = Reader::new(params, &["n_bins"])?;
        let n_bins = r.usize("n_bins")?;
        ensure(n_bins >= 2, || format!("n_bins must be at least 2, got {n_bins}"))?;
        Ok(NbParams { n_bins })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BinClass {
    midpoint: f64,
    log_prior: f64,
    means: Vec<f64>,
    variances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    edges: Vec<f64>,
    classes: Vec<BinClass>,
}

/// Bin of `v` among `n_bins` equal-width bins on `[lo, hi]`; the top edge
/// belongs to the last bin.
fn bin_of(v: f64, lo: f64, width: f64, n_bins: usize) -> usize {
    (((v - lo) / width).floor().max(0.0) as usize).min(n_bins - 1)
}

pub fn fit(params: &NbParams, x: &Matrix, y: &[f64]) -> Result<NbModel, ModelError> {
    let (n, d) = (x.n_rows(), x.n_cols());
    if n <= params.n_bins {
        return Err(ModelError::InvalidParam(format!(
            "n_bins = {} needs more than that many rows, got {n}",
            params.n_bins
        )));
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(NbModel {
            edges: vec![lo, hi],
            classes: vec![BinClass {
                midpoint: lo,
                log_prior: 0.0,
                means: vec![0.0; d],
                variances: vec![1.0; d],
            }],
        });
    }
    let k = params.n_bins;
    let width = (hi - lo) / k as f64;
    let edges: Vec<f64> = (0..=k).map(|b| if b == k { hi } else { lo + width * b as f64 }).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &v) in y.iter().enumerate() {
        members[bin_of(v, lo, width, k)].push(i);
    }
    let classes = members
        .iter()
        .enumerate()
        .filter(|(_, rows)| !rows.is_empty())
        .map(|(b, rows)| {
            let m = rows.len() as f64;
            let means: Vec<f64> = (0..d).map(|j| rows.iter().map(|&i| x.get(i, j)).sum::<f64>() / m).collect();
            let variances = (0..d)
                .map(|j| {
                    let v = rows.iter().map(|&i| (x.get(i, j) - means[j]).powi(2)).sum::<f64>() / m;
                    v.max(VARIANCE_FLOOR)
                })
                .collect();
            BinClass {
                midpoint: 0.5 * (edges[b] + edges[b + 1]),
                log_prior: (m / n as f64).ln(),
                means,
                variances,
            }
        })
        .collect();
    Ok(NbModel { edges, classes })
}

impl NbModel {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Representative value of every non-empty bin.
    pub fn midpoints(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.midpoint).collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut best = (f64::NEG_INFINITY, self.classes[0].midpoint);
        for c in &self.classes {
            let ll: f64 = c.log_prior
                + x.iter()
                    .zip(c.means.iter().zip(&c.variances))
                    .map(|(&v, (&m, &s2))| -0.5 * ((v - m).powi(2) / s2 + s2.ln()))
                    .sum::<f64>();
            if ll > best.0 {
                best = (ll, c.midpoint);
            }
        }
        best.1
    }
}
