//! Regression tree grown by maximally selected rank statistics. A node is
//! split on the feature whose best cut has the smallest adjusted p-value, as
//! long as that p-value is at most `alpha`.

use super::maxstat::max_sel_rank_split;
use super::params::{ensure, Reader};
use super::tree::{mean_of, Tree, TreeBuilder};
use super::ModelError;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RtParams {
    pub min_node_size: usize,
    pub minprop: f64,
    pub alpha: f64,
}

impl RtParams {
    pub fn from_params(params: &super::Params) -> Result<Self, ModelError> {
        let r = Reader::new(params, &["min_node_size", "minprop", "alpha"])?;
        let p = RtParams {
            min_node_size: r.usize("min_node_size")?,
            minprop: r.f64("minprop")?,
            alpha: r.f64("alpha")?,
        };
        ensure(p.min_node_size >= 1, || "min_node_size must be at least 1".into())?;
        ensure(p.minprop > 0.0 && p.minprop < 0.5, || "minprop must lie in (0, 0.5)".into())?;
        ensure((0.0..=1.0).contains(&p.alpha), || "alpha must lie in [0, 1]".into())?;
        Ok(p)
    }
}

pub fn fit(params: &RtParams, x: &Matrix, y: &[f64]) -> Tree {
    let mut b = TreeBuilder::new();
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    grow(params, x, y, rows, &mut b);
    b.finish()
}

fn grow(params: &RtParams, x: &Matrix, y: &[f64], rows: Vec<usize>, b: &mut TreeBuilder) -> usize {
    if rows.len() <= params.min_node_size {
        return b.leaf(mean_of(y, &rows));
    }
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..x.n_cols() {
        let xs: Vec<f64> = rows.iter().map(|&i| x.get(i, j)).collect();
        if let Some(s) = max_sel_rank_split(&xs, &ys, params.minprop, params.alpha) {
            if best.is_none_or(|(_, _, p)| s.p_adjusted < p) {
                best = Some((j, s.value, s.p_adjusted));
            }
        }
    }
    let Some((feature, threshold, _)) = best else {
        return b.leaf(mean_of(y, &rows));
    };
    let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x.get(i, feature) <= threshold);
    let node = b.split(feature, threshold);
    let l = grow(params, x, y, left, b);
    let r = grow(params, x, y, right, b);
    b.link(node, l, r);
    node
}
