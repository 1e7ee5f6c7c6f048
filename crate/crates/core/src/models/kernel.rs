use serde::{Deserialize, Serialize};

use crate::matrix::{dot, squared_distance, Matrix};

/// SVR kernel with its parameters. `Vs` is the L1 (Laplacian) exponential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Lin,
    Pol { degree: u32, coef0: f64 },
    Tah { kappa: f64, theta: f64 },
    Rbf { gamma: f64 },
    Vs { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            Kernel::Lin => dot(x, y),
            Kernel::Pol { degree, coef0 } => (dot(x, y) + coef0).powi(degree as i32),
            Kernel::Tah { kappa, theta } => (kappa * dot(x, y) + theta).tanh(),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(x, y)).exp(),
            Kernel::Vs { gamma } => {
                let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-gamma * l1).exp()
            }
        }
    }

    /// Symmetric Gram matrix of the rows of `x`, row-major.
    pub fn gram(&self, x: &Matrix) -> Vec<f64> {
        let n = x.n_rows();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.eval(x.row(i), x.row(j));
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }
}
