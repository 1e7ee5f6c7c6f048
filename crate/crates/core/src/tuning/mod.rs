//! K-fold grid-search cross-validation maximizing the mean G-score.

mod grid;

pub use grid::{default_grid, GridOverrides, HyperGrid};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::evaluate;
use crate::models::{fit, Algorithm, HyperConfig, TrainingData};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("cannot cut {n} rows into {k} folds (need k >= 2 and n >= k)")]
    InvalidFolds { n: usize, k: usize },
    #[error("grid: {0}")]
    Grid(String),
    #[error("{algorithm}: every configuration failed; first error: {first}")]
    AllConfigsFailed { algorithm: Algorithm, first: String },
}

/// Seeded permutation of `0..n` cut into `k` folds whose sizes differ by at
/// most one (larger folds first). Each fold is sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, TuningError> {
    if k < 2 || n < k {
        return Err(TuningError::InvalidFolds { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = perm[at..at + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        at += size;
    }
    Ok(folds)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub e: f64,
    pub f_tp: f64,
    pub f_tn: f64,
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub config: HyperConfig,
    /// `None` when any fold failed.
    pub mean_g: Option<f64>,
    pub sd_g: Option<f64>,
    pub folds: Vec<FoldScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ConfigScore {
    /// Mean G with failures mapped to negative infinity.
    pub fn score(&self) -> f64 {
        self.mean_g.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub algorithm: Algorithm,
    pub k: usize,
    pub scores: Vec<ConfigScore>,
    /// Index into `scores` of the selected configuration.
    pub best: usize,
}

impl CvResult {
    pub fn best_config(&self) -> &HyperConfig {
        &self.scores[self.best].config
    }

    pub fn best_mean_g(&self) -> f64 {
        self.scores[self.best].score()
    }
}

/// Sample mean and standard deviation (`n - 1` denominator).
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 })
}

/// Grid search with `k`-fold cross-validation, configs and folds evaluated
/// on the rayon pool.
pub fn cross_validate(grid: &HyperGrid, data: &TrainingData<'_>, k: usize, seed: u64) -> Result<CvResult, TuningError> {
    cross_validate_with(grid, data, k, seed, true)
}

/// As [`cross_validate`], optionally serial. Both paths give identical
/// results: every fold fit uses the fold's own seed, shared by all configs.
pub fn cross_validate_with(
    grid: &HyperGrid,
    data: &TrainingData<'_>,
    k: usize,
    seed: u64,
    parallel: bool,
) -> Result<CvResult, TuningError> {
    let configs = grid.configs();
    if configs.is_empty() {
        return Err(TuningError::Grid(format!("{}: empty grid", grid.algorithm)));
    }
    let n = data.x.n_rows();
    let folds = kfold_indices(n, k, derive_seed(seed, 0))?;
    let train_of: Vec<Vec<usize>> = folds
        .iter()
        .map(|fold| {
            let mut held = vec![false; n];
            fold.iter().for_each(|&i| held[i] = true);
            (0..n).filter(|&i| !held[i]).collect()
        })
        .collect();

    let tasks: Vec<(usize, usize)> = (0..configs.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let run = |&(c, f): &(usize, usize)| -> Result<FoldScore, String> {
        let train = &train_of[f];
        let x = data.x.select_rows(train);
        let y: Vec<f64> = train.iter().map(|&i| data.y[i]).collect();
        let groups = data.groups.select_rows(train);
        let td = TrainingData {
            x: &x,
            y: &y,
            groups: &groups,
            ..*data
        };
        let model = fit(&configs[c], &td, derive_seed(seed, 1 + f as u64)).map_err(|e| e.to_string())?;
        let held = &folds[f];
        let pred = model
            .predict(&data.x.select_rows(held), Some(&data.groups.select_rows(held)))
            .map_err(|e| e.to_string())?;
        let truth: Vec<f64> = held.iter().map(|&i| data.y[i]).collect();
        let r = evaluate(&pred, &truth, data.y_max).map_err(|e| e.to_string())?;
        Ok(FoldScore {
            e: r.mae,
            f_tp: r.f_tp,
            f_tn: r.f_tn,
            g: r.g,
        })
    };
    let results: Vec<Result<FoldScore, String>> = if parallel {
        tasks.par_iter().map(run).collect()
    } else {
        tasks.iter().map(run).collect()
    };

    let mut scores = Vec::with_capacity(configs.len());
    for (c, config) in configs.into_iter().enumerate() {
        let per_fold = &results[c * k..(c + 1) * k];
        let error = per_fold.iter().find_map(|r| r.as_ref().err().cloned());
        let folds: Vec<FoldScore> = per_fold.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let (mean_g, sd_g) = if error.is_none() {
            let (m, s) = mean_sd(&folds.iter().map(|f| f.g).collect::<Vec<_>>());
            (Some(m), Some(s))
        } else {
            (None, None)
        };
        scores.push(ConfigScore {
            config,
            mean_g,
            sd_g,
            folds,
            error,
        });
    }
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if s.mean_g.is_some() && best.is_none_or(|b| s.score() > scores[b].score()) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        return Err(TuningError::AllConfigsFailed {
            algorithm: grid.algorithm,
            first: scores[0].error.clone().unwrap_or_default(),
        });
    };
    Ok(CvResult {
        algorithm: grid.algorithm,
        k,
        scores,
        best,
    })
}
