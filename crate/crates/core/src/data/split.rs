use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::rng::rng_from_seed;

/// One train/test partition; both index lists are sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub partitions: Vec<Partition>,
}

pub const DEFAULT_SPLITS: usize = 10;
const MIN_ROWS: usize = 10;

/// Ten seeded 80/20 partitions of `0..n_rows`.
pub fn make_split_plan(n_rows: usize, seed: u64) -> Result<SplitPlan, DataError> {
    make_split_plan_with(n_rows, DEFAULT_SPLITS, seed)
}

/// `n_splits` seeded partitions, each training on `floor(0.8 n)` rows. The
/// partitions are pairwise distinct; a permutation that reproduces an
/// earlier test set is redrawn.
pub fn make_split_plan_with(n_rows: usize, n_splits: usize, seed: u64) -> Result<SplitPlan, DataError> {
    if n_rows < MIN_ROWS {
        return Err(DataError::TooFewRows {
            needed: MIN_ROWS,
            got: n_rows,
        });
    }
    let n_train = n_rows * 4 / 5;
    let mut rng = rng_from_seed(seed);
    let mut partitions: Vec<Partition> = Vec::with_capacity(n_splits);
    let mut indices: Vec<usize> = (0..n_rows).collect();
    while partitions.len() < n_splits {
        indices.shuffle(&mut rng);
        let mut train = indices[..n_train].to_vec();
        let mut test = indices[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        if partitions.iter().any(|p| p.test == test) {
            continue;
        }
        partitions.push(Partition { train, test });
    }
    Ok(SplitPlan {
        seed,
        train_fraction: 0.8,
        partitions,
    })
}

/// Summary of pairwise test-set intersection sizes (sample SD).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub mean: f64,
    pub sd: f64,
    pub min: usize,
    pub max: usize,
    pub pairs: usize,
}

pub fn overlap_stats(plan: &SplitPlan) -> Result<OverlapStats, DataError> {
    let parts = &plan.partitions;
    if parts.len() < 2 {
        return Err(DataError::TooFewPartitions);
    }
    let mut sizes = Vec::new();
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            sizes.push(sorted_intersection(&parts[i].test, &parts[j].test));
        }
    }
    let n = sizes.len() as f64;
    let mean = sizes.iter().sum::<usize>() as f64 / n;
    let sd = if sizes.len() > 1 {
        (sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(OverlapStats {
        mean,
        sd,
        min: *sizes.iter().min().unwrap(),
        max: *sizes.iter().max().unwrap(),
        pairs: sizes.len(),
    })
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}
