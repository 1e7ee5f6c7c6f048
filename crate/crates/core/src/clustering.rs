//! K-means with random-swap refinement and silhouette-based selection of the
//! cluster count. Distances are Euclidean throughout.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{squared_distance, Matrix};
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cannot place {k} centers on {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("need at least one point and one cluster")]
    Empty,
    #[error("silhouette needs at least two clusters, got {0}")]
    TooFewClusters(usize),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("invalid cluster range [{k_min}, {k_max}] for {n} points")]
    InvalidRange { k_min: usize, k_max: usize, n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub centers: Matrix,
    pub assignment: Vec<usize>,
    pub sse: f64,
    /// SSE after initialisation and after every accepted step.
    pub sse_trace: Vec<f64>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centers.n_rows()
    }
}

/// Iterations of Lloyd refinement after each swap.
pub const SWAP_LLOYD_ITERS: usize = 2;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_SWAP_ITERS: usize = 30;

fn nearest(point: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centers.n_rows() {
        let d = squared_distance(point, centers.row(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &Matrix, centers: &Matrix, assignment: &mut [usize]) -> f64 {
    let mut sse = 0.0;
    for (i, a) in assignment.iter_mut().enumerate() {
        let (j, d) = nearest(points.row(i), centers);
        *a = j;
        sse += d;
    }
    sse
}

/// Runs up to `iters` Lloyd iterations from `centers`, stopping at an
/// assignment fixpoint. An emptied cluster is reseeded at the point farthest
/// from its current center. Returns the final clustering with its SSE trace.
fn lloyd(points: &Matrix, mut centers: Matrix, iters: usize) -> Clustering {
    let (n, d, k) = (points.n_rows(), points.n_cols(), centers.n_rows());
    let mut assignment = vec![usize::MAX; n];
    let mut sse = assign(points, &centers, &mut assignment);
    let mut trace = vec![sse];
    for _ in 0..iters {
        // update step
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &j) in assignment.iter().enumerate() {
            counts[j] += 1;
            for (s, x) in sums.row_mut(j).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let c = counts[j] as f64;
                for (dst, s) in centers.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *dst = s / c;
                }
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(points.row(a), centers.row(assignment[a]));
                        let db = squared_distance(points.row(b), centers.row(assignment[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap();
                centers.row_mut(j).copy_from_slice(points.row(far));
                assignment[far] = j;
            }
        }
        let previous = assignment.clone();
        sse = assign(points, &centers, &mut assignment);
        trace.push(sse);
        if assignment == previous {
            break;
        }
    }
    Clustering {
        centers,
        assignment,
        sse,
        sse_trace: trace,
    }
}

fn validate(points: &Matrix, k: usize) -> Result<(), ClusterError> {
    if points.n_rows() == 0 || k == 0 {
        return Err(ClusterError::Empty);
    }
    if k > points.n_rows() {
        return Err(ClusterError::TooManyClusters { k, n: points.n_rows() });
    }
    Ok(())
}

/// k-means++ seeding.
fn init_centers(points: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = points.n_rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n).map(|i| squared_distance(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        } else {
            // all remaining points coincide with a center
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(squared_distance(points.row(i), points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

/// Lloyd's k-means from a seeded k-means++ start.
pub fn kmeans(points: &Matrix, k: usize, max_iters: usize, seed: u64) -> Result<Clustering, ClusterError> {
    validate(points, k)?;
    let mut rng = rng_from_seed(seed);
    let centers = init_centers(points, k, &mut rng);
    Ok(lloyd(points, centers, max_iters))
}

/// k-means followed by `swap_iters` random swaps: a random center jumps to a
/// random data point, two Lloyd iterations follow, and the result is kept
/// only if the SSE strictly decreases.
pub fn random_swap(points: &Matrix, k: usize, swap_iters: usize, seed: u64) -> Result<Clustering, ClusterError> {
    let start = kmeans(points, k, DEFAULT_MAX_ITERS, seed)?;
    Ok(swap_from(points, start, swap_iters, derive_seed(seed, 1)))
}

/// Random swap starting from explicit initial centers.
pub fn random_swap_from(points: &Matrix, centers: Matrix, swap_iters: usize, seed: u64) -> Result<Clustering, ClusterError> {
    validate(points, centers.n_rows())?;
    let start = lloyd(points, centers, DEFAULT_MAX_ITERS);
    Ok(swap_from(points, start, swap_iters, seed))
}

fn swap_from(points: &Matrix, mut best: Clustering, swap_iters: usize, seed: u64) -> Clustering {
    let mut rng = rng_from_seed(seed);
    let (n, k) = (points.n_rows(), best.k());
    for _ in 0..swap_iters {
        let mut centers = best.centers.clone();
        let j = rng.random_range(0..k);
        let p = rng.random_range(0..n);
        centers.row_mut(j).copy_from_slice(points.row(p));
        let candidate = lloyd(points, centers, SWAP_LLOYD_ITERS);
        if candidate.sse < best.sse {
            let mut trace = std::mem::take(&mut best.sse_trace);
            trace.push(candidate.sse);
            best = Clustering {
                sse_trace: trace,
                ..candidate
            };
        }
    }
    best
}

/// Pairwise Euclidean distances, reusable across cluster counts.
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(points: &Matrix) -> Self {
        let n = points.n_rows();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = squared_distance(points.row(i), points.row(j)).sqrt();
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        DistanceMatrix { n, d }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Mean silhouette `(b - a) / max(a, b)`; singleton clusters contribute 0,
/// as do points with `a = b = 0`.
pub fn silhouette(points: &Matrix, clustering: &Clustering) -> Result<f64, ClusterError> {
    silhouette_with(&DistanceMatrix::new(points), &clustering.assignment, clustering.k())
}

pub fn silhouette_with(dist: &DistanceMatrix, assignment: &[usize], k: usize) -> Result<f64, ClusterError> {
    if k < 2 {
        return Err(ClusterError::TooFewClusters(k));
    }
    let mut sizes = vec![0usize; k];
    for &a in assignment {
        sizes[a] += 1;
    }
    if let Some(j) = sizes.iter().position(|&s| s == 0) {
        return Err(ClusterError::EmptyCluster(j));
    }
    let n = assignment.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let own = assignment[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            sums[assignment[j]] += dist.get(i, j);
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Default `[2, min(25, floor(sqrt(n)))]` search range.
pub fn default_k_range(n: usize) -> (usize, usize) {
    let hi = ((n as f64).sqrt().floor() as usize).clamp(2, 25);
    (2, hi.min(n.max(2)))
}

/// Random-swap clustering for every `k` in range; returns the k with the
/// largest silhouette (smallest k on ties).
pub fn select_cluster_count(
    points: &Matrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<(usize, Clustering), ClusterError> {
    select_cluster_count_with(points, k_min, k_max, DEFAULT_SWAP_ITERS, seed)
}

pub fn select_cluster_count_with(
    points: &Matrix,
    k_min: usize,
    k_max: usize,
    swap_iters: usize,
    seed: u64,
) -> Result<(usize, Clustering), ClusterError> {
    let n = points.n_rows();
    if !(2 <= k_min && k_min <= k_max && k_max <= n) {
        return Err(ClusterError::InvalidRange { k_min, k_max, n });
    }
    let dist = DistanceMatrix::new(points);
    let mut best: Option<(f64, usize, Clustering)> = None;
    for k in k_min..=k_max {
        let c = random_swap(points, k, swap_iters, derive_seed(seed, k as u64))?;
        // coincident points can leave a center without members
        let si = silhouette_with(&dist, &c.assignment, k).unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(s, _, _)| si > *s) {
            best = Some((si, k, c));
        }
    }
    let (_, k, c) = best.unwrap();
    Ok((k, c))
}

#[cfg(test)]
mod tests {
    use super::*;

fn sse_of(points: &Matrix, centers: &Matrix, assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| squared_distance(points.row(i), centers.row(j)))
        .sum()
}
    use rand_distr::{Distribution, Normal};

    fn line(values: &[f64]) -> Matrix {
        Matrix::column_vector(values)
    }

    fn sorted_centers(c: &Clustering) -> Vec<f64> {
        let mut v = c.centers.column(0);
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn separable_pair() {
        let c = kmeans(&line(&[0.0, 10.0]), 2, 10, 1).unwrap();
        assert_eq!(sorted_centers(&c), vec![0.0, 10.0]);
        assert_eq!(c.sse, 0.0);
    }

    #[test]
    fn single_cluster_is_mean() {
        let pts = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 8.0]]);
        let c = kmeans(&pts, 1, 10, 3).unwrap();
        assert_eq!(c.centers.row(0), &[2.0, 4.0]);
    }

    /// Best SSE over every 2-partition of a tiny 1-D set.
    fn exhaustive_two_partition_sse(values: &[f64]) -> f64 {
        let n = values.len();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let mut sse = 0.0;
            for side in [true, false] {
                let part: Vec<f64> = (0..n).filter(|&i| (mask >> i & 1 == 1) == side).map(|i| values[i]).collect();
                let m = part.iter().sum::<f64>() / part.len() as f64;
                sse += part.iter().map(|v| (v - m).powi(2)).sum::<f64>();
            }
            best = best.min(sse);
        }
        best
    }

    #[test]
    fn four_points_two_clusters() {
        let v = [0.0, 1.0, 9.0, 10.0];
        assert_eq!(exhaustive_two_partition_sse(&v), 1.0);
        let c = kmeans(&line(&v), 2, 50, 2).unwrap();
        assert_eq!(sorted_centers(&c), vec![0.5, 9.5]);
        assert_eq!(c.sse, 1.0);
    }

    #[test]
    fn too_many_clusters_rejected() {
        assert_eq!(
            kmeans(&line(&[1.0, 2.0]), 3, 10, 0).unwrap_err(),
            ClusterError::TooManyClusters { k: 3, n: 2 }
        );
    }

    #[test]
    fn zero_swaps_equals_kmeans() {
        let pts = line(&[0.0, 0.3, 4.0, 4.4, 9.0, 9.1, 9.5]);
        let a = kmeans(&pts, 3, DEFAULT_MAX_ITERS, 5).unwrap();
        let b = random_swap(&pts, 3, 0, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn swap_escapes_adversarial_start() {
        let pts = line(&[0.0, 1.0, 9.0, 10.0]);
        let plain = lloyd(&pts, line(&[0.5, 1.0]), DEFAULT_MAX_ITERS);
        let swapped = random_swap_from(&pts, line(&[0.5, 1.0]), 50, 9).unwrap();
        assert!(swapped.sse <= plain.sse);
        assert_eq!(swapped.sse, 1.0);
    }

    #[test]
    fn one_center_per_point() {
        let pts = line(&[0.0, 2.0, 5.0, 7.5]);
        assert_eq!(random_swap(&pts, 4, 10, 1).unwrap().sse, 0.0);
    }

    #[test]
    fn sse_trace_is_monotone() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = rng_from_seed(3);
        let rows: Vec<[f64; 2]> = (0..120).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
        let pts = Matrix::from_rows(&rows);
        let c = random_swap(&pts, 6, 40, 11).unwrap();
        for w in c.sse_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", w);
        }
        assert!((c.sse - sse_of(&pts, &c.centers, &c.assignment)).abs() < 1e-9);
    }

    #[test]
    fn silhouette_of_far_clusters() {
        let pts = line(&[0.0, 0.1, 100.0, 100.1]);
        let c = kmeans(&pts, 2, 10, 0).unwrap();
        let si = silhouette(&pts, &c).unwrap();
        assert!(si > 0.9, "{si}");
        // outer points see b = 100.05, inner points b = 99.95; a = 0.1 throughout
        let expected = 0.5 * ((1.0 - 0.1 / 100.05) + (1.0 - 0.1 / 99.95));
        assert!((si - expected).abs() < 1e-9);
    }

    #[test]
    fn silhouette_identical_points_is_zero() {
        let pts = line(&[3.0; 4]);
        let c = Clustering {
            centers: line(&[3.0, 3.0]),
            assignment: vec![0, 0, 1, 1],
            sse: 0.0,
            sse_trace: vec![0.0],
        };
        assert_eq!(silhouette(&pts, &c).unwrap(), 0.0);
    }

    #[test]
    fn silhouette_requires_two_clusters() {
        let pts = line(&[0.0, 1.0]);
        let c = kmeans(&pts, 1, 5, 0).unwrap();
        assert_eq!(silhouette(&pts, &c), Err(ClusterError::TooFewClusters(1)));
    }

    #[test]
    fn singleton_range_and_determinism() {
        let pts = line(&[0.0, 0.2, 0.4, 5.0, 5.1, 9.0, 9.3]);
        let (k, _) = select_cluster_count(&pts, 2, 2, 4).unwrap();
        assert_eq!(k, 2);
        assert_eq!(
            select_cluster_count(&pts, 2, 5, 4).unwrap(),
            select_cluster_count(&pts, 2, 5, 4).unwrap()
        );
        assert!(select_cluster_count(&pts, 1, 3, 0).is_err());
    }

    #[test]
    fn three_blobs_select_three() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = rng_from_seed(17);
        let mut rows = Vec::new();
        for c in [0.0, 50.0, 100.0] {
            for _ in 0..20 {
                rows.push([c + normal.sample(&mut rng), normal.sample(&mut rng)]);
            }
        }
        let (k, _) = select_cluster_count(&Matrix::from_rows(&rows), 2, 6, 1).unwrap();
        assert_eq!(k, 3);
    }

    #[test]
    fn default_range_is_bounded() {
        assert_eq!(default_k_range(900), (2, 25));
        assert_eq!(default_k_range(30), (2, 5));
    }
}
