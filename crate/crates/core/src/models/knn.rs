use serde::{Deserialize, Serialize};

use super::params::{ensure, Reader};
use super::ModelError;
use crate::matrix::{squared_distance, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    InverseDistance,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnnParams {
    pub k: usize,
    pub weighting: Weighting,
}

impl KnnParams {
    pub fn from_params(params: &super::Params) -> Result<Self, ModelError> {
        let r = Reader::new(params, &["k", "weighting"])?;
        let k = r.usize("k")?;
        ensure(k >= 1, || "k must be at least 1".into())?;
        let weighting = match r.text("weighting")? {
            "uniform" => Weighting::Uniform,
            "inverse" | "inverse_distance" => Weighting::InverseDistance,
            other => return Err(ModelError::InvalidParam(format!("unknown weighting `{other}`"))),
        };
        Ok(KnnParams { k, weighting })
    }
}

/// Stores the training set; prediction averages the `k` Euclidean-nearest
/// targets (ties by lower row index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    weighting: Weighting,
    x: Matrix,
    y: Vec<f64>,
}

pub fn fit(params: &KnnParams, x: &Matrix, y: &[f64]) -> Result<KnnModel, ModelError> {
    if params.k > x.n_rows() {
        return Err(ModelError::InvalidParam(format!(
            "k = {} exceeds the {} training rows",
            params.k,
            x.n_rows()
        )));
    }
    Ok(KnnModel {
        k: params.k,
        weighting: params.weighting,
        x: x.clone(),
        y: y.to_vec(),
    })
}

impl KnnModel {
    pub fn predict_row(&self, q: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self.x.rows_iter().map(|r| squared_distance(r, q)).zip(0..).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        match self.weighting {
            Weighting::Uniform => d.iter().map(|&(_, i)| self.y[i]).sum::<f64>() / self.k as f64,
            Weighting::InverseDistance => {
                let exact: Vec<f64> = d.iter().filter(|p| p.0 == 0.0).map(|&(_, i)| self.y[i]).collect();
                if !exact.is_empty() {
                    return exact.iter().sum::<f64>() / exact.len() as f64;
                }
                let (num, den) = d.iter().fold((0.0, 0.0), |(num, den), &(sq, i)| {
                    let w = 1.0 / sq.sqrt();
                    (num + w * self.y[i], den + w)
                });
                num / den
            }
        }
    }
}
