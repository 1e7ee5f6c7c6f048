//! Random forest of extremely randomized trees: each tree sees a 63.21%
//! subsample drawn without replacement, and each node picks the best of a
//! few uniformly drawn cut points on a few randomly chosen features.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::params::{ensure, Reader};
use super::tree::{mean_of, Tree, TreeBuilder};
use super::ModelError;
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed, Rng};

pub const SUBSAMPLE_FRACTION: f64 = 0.6321;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RfParams {
    pub n_trees: usize,
    pub min_node_size: usize,
    pub n_split_vars: usize,
    pub n_random_cuts: usize,
}

impl RfParams {
    pub fn from_params(params: &super::Params) -> Result<Self, ModelError> {
        let r = Reader::new(params, &["n_trees", "min_node_size", "n_split_vars", "n_random_cuts"])?;
        let p = RfParams {
            n_trees: r.usize("n_trees")?,
            min_node_size: r.usize("min_node_size")?,
            n_split_vars: r.usize("n_split_vars")?,
            n_random_cuts: r.usize("n_random_cuts")?,
        };
        ensure(p.n_trees >= 1, || "n_trees must be at least 1".into())?;
        ensure(p.min_node_size >= 1, || "min_node_size must be at least 1".into())?;
        ensure(p.n_split_vars >= 1, || "n_split_vars must be at least 1".into())?;
        ensure(p.n_random_cuts >= 1, || "n_random_cuts must be at least 1".into())?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Summed SSE decrease per feature over all splits of all trees.
    pub importance: Vec<f64>,
}

impl Forest {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit(params: &RfParams, x: &Matrix, y: &[f64], seed: u64) -> Result<Forest, ModelError> {
    let (n, d) = (x.n_rows(), x.n_cols());
    if params.n_split_vars > d {
        return Err(ModelError::InvalidParam(format!(
            "n_split_vars = {} exceeds the {d} features",
            params.n_split_vars
        )));
    }
    let m = ((SUBSAMPLE_FRACTION * n as f64).ceil() as usize).clamp(1, n);
    let mut importance = vec![0.0; d];
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t as u64));
            let mut rows = sample(&mut rng, n, m).into_vec();
            rows.sort_unstable();
            let mut b = TreeBuilder::new();
            let mut grower = Grower {
                params,
                x,
                y,
                rng: &mut rng,
                importance: &mut importance,
            };
            grower.grow(rows, &mut b);
            b.finish()
        })
        .collect();
    Ok(Forest { trees, importance })
}

struct Grower<'a> {
    params: &'a RfParams,
    x: &'a Matrix,
    y: &'a [f64],
    rng: &'a mut Rng,
    importance: &'a mut [f64],
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, b: &mut TreeBuilder) -> usize {
        let first = self.y[rows[0]];
        if rows.iter().all(|&i| self.y[i] == first) {
            return b.leaf(first);
        }
        if rows.len() <= self.params.min_node_size {
            return b.leaf(mean_of(self.y, &rows));
        }
        let Some((feature, cut, gain)) = self.best_cut(&rows) else {
            return b.leaf(mean_of(self.y, &rows));
        };
        self.importance[feature] += gain;
        let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| self.x.get(i, feature) <= cut);
        let node = b.split(feature, cut);
        let l = self.grow(left, b);
        let r = self.grow(right, b);
        b.link(node, l, r);
        node
    }

    /// Best (feature, cut, SSE decrease) among random cuts on up to
    /// `n_split_vars` non-constant features visited in random order.
    fn best_cut(&mut self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let (x, y) = (self.x, self.y);
        let sum: f64 = rows.iter().map(|&i| y[i]).sum();
        let sum_sq: f64 = rows.iter().map(|&i| y[i] * y[i]).sum();
        let n = rows.len() as f64;
        let parent = sum_sq - sum * sum / n;
        let mut features: Vec<usize> = (0..x.n_cols()).collect();
        features.shuffle(self.rng);
        let mut visited = 0;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in features {
            if visited == self.params.n_split_vars {
                break;
            }
            let (lo, hi) = rows
                .iter()
                .map(|&i| x.get(i, j))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if lo == hi {
                continue;
            }
            visited += 1;
            for _ in 0..self.params.n_random_cuts {
                let cut = self.rng.random_range(lo..hi);
                let (mut nl, mut sl, mut ql) = (0.0, 0.0, 0.0);
                for &i in rows {
                    if x.get(i, j) <= cut {
                        nl += 1.0;
                        sl += y[i];
                        ql += y[i] * y[i];
                    }
                }
                let nr = n - nl;
                if nl == 0.0 || nr == 0.0 {
                    continue;
                }
                let (sr, qr) = (sum - sl, sum_sq - ql);
                let gain = parent - (ql - sl * sl / nl) - (qr - sr * sr / nr);
                if best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((j, cut, gain));
                }
            }
        }
        best.map(|(j, c, g)| (j, c, g.max(0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let rows: Vec<[f64; 3]> = (0..80).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let y = rows.iter().map(|r| r[0] * 2.0 - r[1]).collect();
        (Matrix::from_rows(&rows), y)
    }

    fn params() -> RfParams {
        RfParams {
            n_trees: 20,
            min_node_size: 3,
            n_split_vars: 2,
            n_random_cuts: 3,
        }
    }

    #[test]
    fn mean_of_trees() {
        let (x, y) = data(1);
        let f = fit(&params(), &x, &y, 4).unwrap();
        for r in x.rows_iter() {
            let mean = f.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / f.trees.len() as f64;
            assert_eq!(f.predict_row(r), mean);
        }
    }

    #[test]
    fn constant_target() {
        let (x, _) = data(2);
        let y = vec![0.3; x.n_rows()];
        let f = fit(&params(), &x, &y, 4).unwrap();
        assert!(x.rows_iter().all(|r| (f.predict_row(r) - 0.3).abs() < 1e-12));
    }

    #[test]
    fn deterministic() {
        let (x, y) = data(3);
        assert_eq!(fit(&params(), &x, &y, 8).unwrap(), fit(&params(), &x, &y, 8).unwrap());
        assert_ne!(fit(&params(), &x, &y, 8).unwrap(), fit(&params(), &x, &y, 9).unwrap());
    }

    #[test]
    fn too_many_split_vars() {
        let (x, y) = data(4);
        let p = RfParams { n_split_vars: 4, ..params() };
        assert!(fit(&p, &x, &y, 0).is_err());
    }
}
