//! Epsilon-insensitive support vector regression solved by SMO with
//! second-order working-set selection on a precomputed kernel matrix.
//!
//! The dual is written over `2n` variables `a = (alpha, alpha*)` with signs
//! `s = (+1, -1)`: minimize `0.5 a'Qa + p'a` subject to `0 <= a <= C` and
//! `s'a = 0`, where `Q_ij = s_i s_j K(x_i, x_j)` and
//! `p = (eps - y, eps + y)`. The regression function is
//! `f(x) = sum_i (alpha_i - alpha*_i) K(x_i, x) - rho`.

use serde::{Deserialize, Serialize};

use super::params::{ensure, Reader};
use super::{Kernel, KernelKind, ModelError};
use crate::matrix::Matrix;

/// Stop once the maximal KKT violation falls below this.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: Kernel,
    pub tolerance: f64,
}

impl SvrParams {
    pub fn from_params(kind: KernelKind, params: &super::Params) -> Result<Self, ModelError> {
        let kernel_keys: &[&str] = match kind {
            KernelKind::Lin => &[],
            KernelKind::Pol => &["degree", "coef0"],
            KernelKind::Tah => &["kappa", "theta"],
            KernelKind::Rbf | KernelKind::Vs => &["gamma"],
        };
        let mut allowed = vec!["C", "epsilon", "tolerance"];
        allowed.extend_from_slice(kernel_keys);
        let r = Reader::new(params, &allowed)?;
        let kernel = match kind {
            KernelKind::Lin => Kernel::Lin,
            KernelKind::Pol => {
                let degree = r.usize("degree")?;
                ensure((1..=10).contains(&degree), || "degree must lie in [1, 10]".into())?;
                Kernel::Pol {
                    degree: degree as u32,
                    coef0: r.f64("coef0")?,
                }
            }
            KernelKind::Tah => Kernel::Tah {
                kappa: r.f64("kappa")?,
                theta: r.f64("theta")?,
            },
            KernelKind::Rbf => Kernel::Rbf { gamma: r.f64("gamma")? },
            KernelKind::Vs => Kernel::Vs { gamma: r.f64("gamma")? },
        };
        if let Kernel::Rbf { gamma } | Kernel::Vs { gamma } = kernel {
            ensure(gamma > 0.0, || "gamma must be positive".into())?;
        }
        let p = SvrParams {
            c: r.f64("C")?,
            epsilon: r.f64("epsilon")?,
            kernel,
            tolerance: r.f64_or("tolerance", DEFAULT_TOLERANCE)?,
        };
        ensure(p.c > 0.0, || "C must be positive".into())?;
        ensure(p.epsilon >= 0.0, || "epsilon must be non-negative".into())?;
        ensure(p.tolerance > 0.0, || "tolerance must be positive".into())?;
        Ok(p)
    }
}

/// Dual solution of one SVR problem.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DualSolution {
    pub fn coefficients(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.alpha_star).map(|(a, b)| a - b).collect()
    }
}

/// Iteration cap: `max(100_000, 100 * 2n)`.
pub fn default_max_iterations(n: usize) -> usize {
    (200 * n).max(100_000)
}

/// Solves the dual for a row-major `n x n` kernel matrix.
pub fn solve(k: &[f64], y: &[f64], c: f64, epsilon: f64, tolerance: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    debug_assert_eq!(k.len(), n * n);
    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let kij = |i: usize, j: usize| k[(i % n) * n + j % n];
    let q = |i: usize, j: usize| sign(i) * sign(j) * kij(i, j);
    let qd: Vec<f64> = (0..l).map(|t| kij(t, t)).collect();
    let mut a = vec![0.0; l];
    let mut g: Vec<f64> = (0..l).map(|t| if t < n { epsilon - y[t] } else { epsilon + y[t - n] }).collect();
    let upper = |a: &[f64], t: usize| a[t] >= c;
    let lower = |a: &[f64], t: usize| a[t] <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // first index: maximal violating -s_t G_t over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..l {
            let v = if sign(t) > 0.0 {
                if upper(&a, t) {
                    continue;
                }
                -g[t]
            } else {
                if lower(&a, t) {
                    continue;
                }
                g[t]
            };
            if v >= gmax {
                gmax = v;
                i_sel = t;
            }
        }
        // second index: largest second-order objective decrease over I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..l {
            let (in_low, v) = if sign(t) > 0.0 { (!lower(&a, t), g[t]) } else { (!upper(&a, t), -g[t]) };
            if !in_low {
                continue;
            }
            if v >= gmax2 {
                gmax2 = v;
            }
            if i_sel == usize::MAX {
                continue;
            }
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let mut quad = qd[i_sel] + qd[t] - 2.0 * sign(i_sel) * sign(t) * q(i_sel, t);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = t;
                }
            }
        }
        if gmax + gmax2 < tolerance || i_sel == usize::MAX || j_sel == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (a[i], a[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let mut quad = qd[i] + qd[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let (di, dj) = (a[i] - old_i, a[j] - old_j);
        for t in 0..l {
            g[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // rho from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..l {
        let yg = sign(t) * g[t];
        if upper(&a, t) {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(&a, t) {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    DualSolution {
        alpha: a[..n].to_vec(),
        alpha_star: a[n..].to_vec(),
        rho,
        iterations,
        converged,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub support_vectors: Matrix,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub fn fit(params: &SvrParams, x: &Matrix, y: &[f64]) -> SvrModel {
    let k = params.kernel.gram(x);
    let sol = solve(&k, y, params.c, params.epsilon, params.tolerance, default_max_iterations(y.len()));
    let beta = sol.coefficients();
    let sv: Vec<usize> = (0..y.len()).filter(|&i| beta[i] != 0.0).collect();
    SvrModel {
        kernel: params.kernel,
        support_vectors: x.select_rows(&sv),
        coefficients: sv.iter().map(|&i| beta[i]).collect(),
        bias: -sol.rho,
        converged: sol.converged,
        iterations: sol.iterations,
    }
}

impl SvrModel {
    pub fn n_support(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .rows_iter()
            .zip(&self.coefficients)
            .map(|(s, b)| b * self.kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin_params(c: f64, epsilon: f64) -> SvrParams {
        SvrParams {
            c,
            epsilon,
            kernel: Kernel::Lin,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    #[test]
    fn wide_tube_is_constant() {
        let x = Matrix::column_vector(&[0.0, 1.0, 2.0, 3.0]);
        let y = [0.1, 0.3, 0.2, 0.4];
        let m = fit(&lin_params(1.0, 0.5), &x, &y);
        assert_eq!(m.n_support(), 0);
        assert!((m.predict_row(&[10.0]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_within_tube() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 30.0).collect();
        let y: Vec<f64> = xs.iter().map(|v| 0.8 * v - 0.2).collect();
        let x = Matrix::column_vector(&xs);
        let m = fit(&lin_params(100.0, 0.01), &x, &y);
        assert!(m.converged);
        for (r, t) in x.rows_iter().zip(&y) {
            assert!((m.predict_row(r) - t).abs() <= 0.01 + 1e-3);
        }
    }

    #[test]
    fn box_constraints_hold() {
        let x = Matrix::from_rows(&(0..25).map(|i| [(i as f64).sin(), (i as f64 * 0.3).cos()]).collect::<Vec<_>>());
        let y: Vec<f64> = (0..25).map(|i| ((i * 7) % 5) as f64 / 5.0 - 0.5).collect();
        let k = Kernel::Rbf { gamma: 1.0 }.gram(&x);
        let s = solve(&k, &y, 0.5, 0.05, 1e-3, 100_000);
        assert!(s.converged);
        assert!(s.alpha.iter().chain(&s.alpha_star).all(|&a| (0.0..=0.5).contains(&a)));
        let total: f64 = s.coefficients().iter().sum();
        assert!(total.abs() < 1e-9);
    }
}
