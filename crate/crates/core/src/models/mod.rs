//! Nine regression families behind one fit/predict contract.
//!
//! Every family regresses the normalized delay; the classification reading
//! (`ŷ > 0` late, `ŷ <= 0` timely) happens in [`crate::metrics`]. Fitting is
//! a pure function of the data, the [`HyperConfig`] and a seed.

pub mod ffnn;
pub mod gbm;
pub mod kernel;
pub mod knn;
pub mod maxstat;
pub mod mlm;
pub mod nb;
pub mod params;
pub mod rbfn;
pub mod rf;
pub mod rt;
pub mod svr;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterError;
use crate::data::GroupStructure;
use crate::matrix::Matrix;
pub use kernel::Kernel;
pub use params::{ParamValue, Params};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameter: {0}")]
    InvalidParam(String),
    #[error("invalid training data: {0}")]
    InvalidData(String),
    #[error("model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{family} training diverged at epoch {epoch}")]
    Divergence { family: Family, epoch: usize },
    #[error("non-finite prediction for row {row}")]
    NonFinite { row: usize },
    #[error("feature importance is not defined for {0}")]
    Unsupported(Family),
    #[error("group structure has {got} rows, expected {expected}")]
    GroupMismatch { expected: usize, got: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Model family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "MLM_RI")]
    MlmRi,
    #[serde(rename = "MLM_RS")]
    MlmRs,
    #[serde(rename = "NB")]
    Nb,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "RBFN")]
    Rbfn,
    #[serde(rename = "FFNN")]
    Ffnn,
    #[serde(rename = "RT")]
    Rt,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "GBM")]
    Gbm,
    #[serde(rename = "SVR")]
    Svr,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::MlmRi => "MLM_RI",
            Family::MlmRs => "MLM_RS",
            Family::Nb => "NB",
            Family::Knn => "KNN",
            Family::Rbfn => "RBFN",
            Family::Ffnn => "FFNN",
            Family::Rt => "RT",
            Family::Rf => "RF",
            Family::Gbm => "GBM",
            Family::Svr => "SVR",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "LIN")]
    Lin,
    #[serde(rename = "POL")]
    Pol,
    #[serde(rename = "TAH")]
    Tah,
    #[serde(rename = "RBF")]
    Rbf,
    #[serde(rename = "VS")]
    Vs,
}

/// A reported algorithm: a family, with the SVR family split by kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    MlmRi,
    MlmRs,
    Nb,
    Knn,
    Rbfn,
    Ffnn,
    Rt,
    Rf,
    Gbm,
    Svr(KernelKind),
}

impl Algorithm {
    /// Every algorithm in report order.
    pub const ALL: [Algorithm; 14] = [
        Algorithm::MlmRi,
        Algorithm::MlmRs,
        Algorithm::Nb,
        Algorithm::Knn,
        Algorithm::Rbfn,
        Algorithm::Ffnn,
        Algorithm::Rt,
        Algorithm::Rf,
        Algorithm::Gbm,
        Algorithm::Svr(KernelKind::Lin),
        Algorithm::Svr(KernelKind::Pol),
        Algorithm::Svr(KernelKind::Tah),
        Algorithm::Svr(KernelKind::Rbf),
        Algorithm::Svr(KernelKind::Vs),
    ];

    pub fn family(self) -> Family {
        match self {
            Algorithm::MlmRi => Family::MlmRi,
            Algorithm::MlmRs => Family::MlmRs,
            Algorithm::Nb => Family::Nb,
            Algorithm::Knn => Family::Knn,
            Algorithm::Rbfn => Family::Rbfn,
            Algorithm::Ffnn => Family::Ffnn,
            Algorithm::Rt => Family::Rt,
            Algorithm::Rf => Family::Rf,
            Algorithm::Gbm => Family::Gbm,
            Algorithm::Svr(_) => Family::Svr,
        }
    }

    pub fn kernel(self) -> Option<KernelKind> {
        match self {
            Algorithm::Svr(k) => Some(k),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::MlmRi => "MLM-RI",
            Algorithm::MlmRs => "MLM-RS",
            Algorithm::Nb => "NB",
            Algorithm::Knn => "KNN",
            Algorithm::Rbfn => "RBFN",
            Algorithm::Ffnn => "FFNN",
            Algorithm::Rt => "RT",
            Algorithm::Rf => "RF",
            Algorithm::Gbm => "GBM",
            Algorithm::Svr(KernelKind::Lin) => "SVR-LIN",
            Algorithm::Svr(KernelKind::Pol) => "SVR-POL",
            Algorithm::Svr(KernelKind::Tah) => "SVR-TAH",
            Algorithm::Svr(KernelKind::Rbf) => "SVR-RBF",
            Algorithm::Svr(KernelKind::Vs) => "SVR-VS",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown algorithm `{0}`")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;

    /// Accepts report labels (`SVR-RBF`) and underscore forms (`svr_rbf`),
    /// case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == norm)
            .ok_or_else(|| UnknownAlgorithm(s.to_string()))
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One point of a hyperparameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub algorithm: Algorithm,
    pub params: Params,
}

impl HyperConfig {
    pub fn new<K: Into<String>>(algorithm: Algorithm, pairs: impl IntoIterator<Item = (K, ParamValue)>) -> Self {
        HyperConfig {
            algorithm,
            params: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn family(&self) -> Family {
        self.algorithm.family()
    }

    /// `k=5 weighting=uniform`; `-` when there are no parameters.
    pub fn describe(&self) -> String {
        if self.params.is_empty() {
            "-".to_string()
        } else {
            params::describe(&self.params)
        }
    }

    /// Parses the parameters without fitting anything.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self.algorithm {
            Algorithm::MlmRi | Algorithm::MlmRs => mlm::MlmParams::from_params(&self.params).map(drop),
            Algorithm::Nb => nb::NbParams::from_params(&self.params).map(drop),
            Algorithm::Knn => knn::KnnParams::from_params(&self.params).map(drop),
            Algorithm::Rbfn => rbfn::RbfnParams::from_params(&self.params).map(drop),
            Algorithm::Ffnn => ffnn::FfnnParams::from_params(&self.params).map(drop),
            Algorithm::Rt => rt::RtParams::from_params(&self.params).map(drop),
            Algorithm::Rf => rf::RfParams::from_params(&self.params).map(drop),
            Algorithm::Gbm => gbm::GbmParams::from_params(&self.params).map(drop),
            Algorithm::Svr(kind) => svr::SvrParams::from_params(kind, &self.params).map(drop),
        }
    }
}

/// Inputs to a fit. `y_max` scales the error term of the G-score used for
/// checkpointing; `slope_columns` lists the feature columns that receive
/// random course slopes in MLM-RS.
#[derive(Clone, Copy, Debug)]
pub struct TrainingData<'a> {
    pub x: &'a Matrix,
    pub y: &'a [f64],
    pub groups: &'a GroupStructure,
    pub slope_columns: &'a [usize],
    pub y_max: f64,
}

impl<'a> TrainingData<'a> {
    fn validate(&self) -> Result<(), ModelError> {
        let n = self.x.n_rows();
        if n == 0 || self.x.n_cols() == 0 {
            return Err(ModelError::InvalidData("empty feature matrix".into()));
        }
        if self.y.len() != n {
            return Err(ModelError::InvalidData(format!("{} targets for {n} rows", self.y.len())));
        }
        if self.groups.len() != n {
            return Err(ModelError::GroupMismatch {
                expected: n,
                got: self.groups.len(),
            });
        }
        if !self.x.as_slice().iter().chain(self.y).all(|v| v.is_finite()) {
            return Err(ModelError::InvalidData("non-finite value in training data".into()));
        }
        if !(self.y_max > 0.0 && self.y_max.is_finite()) {
            return Err(ModelError::InvalidData(format!("y_max must be positive, got {}", self.y_max)));
        }
        if let Some(&c) = self.slope_columns.iter().find(|&&c| c >= self.x.n_cols()) {
            return Err(ModelError::InvalidData(format!("slope column {c} out of range")));
        }
        Ok(())
    }
}

/// Training-side facts kept with the model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    /// Validation G per epoch (neural nets) or training loss per stage (GBM).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "parameters")]
pub enum Fitted {
    Mlm(mlm::MlmModel),
    Nb(nb::NbModel),
    Knn(knn::KnnModel),
    Rbfn(rbfn::RbfnModel),
    Ffnn(ffnn::FfnnModel),
    Rt(tree::Tree),
    Rf(rf::Forest),
    Gbm(gbm::GbmModel),
    Svr(svr::SvrModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: HyperConfig,
    pub n_features: usize,
    /// Column names, when the caller recorded them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_names: Vec<String>,
    pub meta: TrainingMeta,
    pub fitted: Fitted,
}

pub const MODEL_FORMAT: &str = "delaybench-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

/// Fits `config` on `data`.
pub fn fit(config: &HyperConfig, data: &TrainingData<'_>, seed: u64) -> Result<TrainedModel, ModelError> {
    data.validate()?;
    let mut meta = TrainingMeta {
        seed,
        ..TrainingMeta::default()
    };
    let fitted = match config.algorithm {
        Algorithm::MlmRi | Algorithm::MlmRs => {
            let p = mlm::MlmParams::from_params(&config.params)?;
            let slopes: &[usize] = if config.algorithm == Algorithm::MlmRs {
                data.slope_columns
            } else {
                &[]
            };
            let m = mlm::fit(&p, data.x, data.y, data.groups, slopes)?;
            meta.converged = Some(m.converged);
            meta.iterations = Some(m.iterations);
            if m.ridge {
                meta.warnings.push("singular mixed-model equations; ridge-stabilized solve".into());
            }
            Fitted::Mlm(m)
        }
        Algorithm::Nb => Fitted::Nb(nb::fit(&nb::NbParams::from_params(&config.params)?, data.x, data.y)?),
        Algorithm::Knn => Fitted::Knn(knn::fit(&knn::KnnParams::from_params(&config.params)?, data.x, data.y)?),
        Algorithm::Rbfn => {
            let p = rbfn::RbfnParams::from_params(&config.params)?;
            let (m, trajectory) = rbfn::fit(&p, data.x, data.y, data.y_max, seed)?;
            meta.trajectory = trajectory;
            Fitted::Rbfn(m)
        }
        Algorithm::Ffnn => {
            let p = ffnn::FfnnParams::from_params(&config.params)?;
            let (m, trajectory) = ffnn::fit(&p, data.x, data.y, data.y_max, seed)?;
            meta.trajectory = trajectory;
            Fitted::Ffnn(m)
        }
        Algorithm::Rt => Fitted::Rt(rt::fit(&rt::RtParams::from_params(&config.params)?, data.x, data.y)),
        Algorithm::Rf => Fitted::Rf(rf::fit(&rf::RfParams::from_params(&config.params)?, data.x, data.y, seed)?),
        Algorithm::Gbm => {
            let p = gbm::GbmParams::from_params(&config.params)?;
            let (m, losses) = gbm::fit(&p, data.x, data.y, seed);
            meta.trajectory = losses;
            Fitted::Gbm(m)
        }
        Algorithm::Svr(kind) => {
            let p = svr::SvrParams::from_params(kind, &config.params)?;
            let m = svr::fit(&p, data.x, data.y);
            meta.converged = Some(m.converged);
            meta.iterations = Some(m.iterations);
            Fitted::Svr(m)
        }
    };
    Ok(TrainedModel {
        config: config.clone(),
        n_features: data.x.n_cols(),
        feature_names: Vec::new(),
        meta,
        fitted,
    })
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.config.family()
    }

    /// Predicts normalized delays. `groups` is consulted only by the mixed
    /// models; without it they predict from the fixed effects alone.
    pub fn predict(&self, x: &Matrix, groups: Option<&GroupStructure>) -> Result<Vec<f64>, ModelError> {
        if x.n_cols() != self.n_features {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        if let Some(g) = groups {
            if g.len() != x.n_rows() {
                return Err(ModelError::GroupMismatch {
                    expected: x.n_rows(),
                    got: g.len(),
                });
            }
        }
        let out: Vec<f64> = match &self.fitted {
            Fitted::Mlm(m) => (0..x.n_rows())
                .map(|i| m.predict_row(x.row(i), groups.map(|g| (g.student[i], g.course[i]))))
                .collect(),
            Fitted::Nb(m) => x.rows_iter().map(|r| m.predict_row(r)).collect(),
            Fitted::Knn(m) => x.rows_iter().map(|r| m.predict_row(r)).collect(),
            Fitted::Rbfn(m) => x.rows_iter().map(|r| m.predict_row(r)).collect(),
            Fitted::Ffnn(m) => x.rows_iter().map(|r| m.predict_row(r)).collect(),
            Fitted::Rt(t) => x.rows_iter().map(|r| t.predict_row(r)).collect(),
            Fitted::Rf(m) => x.rows_iter().map(|r| m.predict_row(r)).collect(),
            Fitted::Gbm(m) => x.rows_iter().map(|r| m.predict_row(r)).collect(),
            Fitted::Svr(m) => x.rows_iter().map(|r| m.predict_row(r)).collect(),
        };
        if let Some(row) = out.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { row });
        }
        Ok(out)
    }

    /// Normalized impurity-decrease importance per feature (RF and GBM).
    pub fn feature_importance(&self) -> Result<Vec<f64>, ModelError> {
        match &self.fitted {
            Fitted::Rf(f) => Ok(tree::normalize_importance(&f.importance)),
            Fitted::Gbm(g) => Ok(tree::normalize_importance(&g.importance)),
            _ => Err(ModelError::Unsupported(self.family())),
        }
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(ModelError::Format(format!("unexpected format tag `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(ModelError::Format(format!("unsupported version {}", file.version)));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Validation G-score used for neural checkpointing.
pub(crate) fn validation_g(predictions: &[f64], targets: &[f64], y_max: f64) -> f64 {
    crate::metrics::evaluate(predictions, targets, y_max).map_or(f64::NEG_INFINITY, |r| r.g)
}

/// Seeded 75/25 split of `0..n` into (fit, validation) rows, both sorted.
pub(crate) fn internal_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut crate::rng::rng_from_seed(seed));
    let n_fit = (n * 3 / 4).max(1).min(n.saturating_sub(1).max(1));
    let mut fit = idx[..n_fit].to_vec();
    let mut val = if n_fit < n { idx[n_fit..].to_vec() } else { fit.clone() };
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}
