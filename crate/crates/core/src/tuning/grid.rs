use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TuningError;
use crate::models::{Algorithm, HyperConfig, KernelKind, ParamValue};

/// Ordered Cartesian grid for one algorithm. The last axis varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub algorithm: Algorithm,
    pub axes: Vec<(String, Vec<ParamValue>)>,
}

impl HyperGrid {
    pub fn new(algorithm: Algorithm, axes: Vec<(String, Vec<ParamValue>)>) -> Result<Self, TuningError> {
        if let Some((name, _)) = axes.iter().find(|(_, v)| v.is_empty()) {
            return Err(TuningError::Grid(format!("{algorithm}: axis `{name}` has no values")));
        }
        let grid = HyperGrid { algorithm, axes };
        for c in grid.configs() {
            c.validate()
                .map_err(|e| TuningError::Grid(format!("{algorithm} [{}]: {e}", c.describe())))?;
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All configurations in row-major order over the declared axes.
    pub fn configs(&self) -> Vec<HyperConfig> {
        let mut out = vec![HyperConfig::new::<String>(self.algorithm, [])];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.params.insert(name.clone(), v.clone());
                        c
                    })
                })
                .collect();
        }
        out
    }
}

fn ints(v: &[i64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Int(x)).collect()
}

fn floats(v: &[f64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Float(x)).collect()
}

fn texts(v: &[&str]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::from(x)).collect()
}

fn axes(pairs: Vec<(&str, Vec<ParamValue>)>) -> Vec<(String, Vec<ParamValue>)> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// The version-pinned default grid for an algorithm. The values are listed
/// in the README's configuration reference.
pub fn default_grid(algorithm: Algorithm) -> HyperGrid {
    let svr_base = || vec![("C", floats(&[0.1, 1.0, 10.0])), ("epsilon", floats(&[0.01, 0.05]))];
    let a = match algorithm {
        Algorithm::MlmRi | Algorithm::MlmRs => vec![],
        Algorithm::Nb => vec![("n_bins", ints(&[4, 8, 16, 32, 64]))],
        Algorithm::Knn => vec![
            ("k", ints(&[1, 3, 5, 9, 15, 25])),
            ("weighting", texts(&["uniform", "inverse_distance"])),
        ],
        Algorithm::Rbfn => vec![
            ("learning_rate", floats(&[0.05, 0.2])),
            ("gaussian_width", floats(&[0.1, 0.3])),
            ("max_epochs", ints(&[300])),
        ],
        Algorithm::Ffnn => vec![
            ("hidden_layers", ints(&[1, 2])),
            ("nodes_per_layer", ints(&[8])),
            ("learning_rate", floats(&[0.01, 0.05])),
            ("max_epochs", ints(&[500])),
        ],
        Algorithm::Rt => vec![
            ("min_node_size", ints(&[5, 10, 20])),
            ("minprop", floats(&[0.1])),
            ("alpha", floats(&[0.01, 0.05, 0.2])),
        ],
        Algorithm::Rf => vec![
            ("n_trees", ints(&[100])),
            ("min_node_size", ints(&[5])),
            ("n_split_vars", ints(&[1, 2, 3])),
            ("n_random_cuts", ints(&[1, 3])),
        ],
        Algorithm::Gbm => vec![
            ("n_trees", ints(&[100])),
            ("max_depth", ints(&[2, 3])),
            ("min_samples_split", ints(&[10])),
            ("learning_rate", floats(&[0.05, 0.1])),
            ("subsample", floats(&[0.8])),
            ("loss", texts(&["squared", "absolute"])),
        ],
        Algorithm::Svr(KernelKind::Lin) => svr_base(),
        Algorithm::Svr(KernelKind::Pol) => vec![
            ("C", floats(&[0.1, 1.0])),
            ("epsilon", floats(&[0.01, 0.05])),
            ("degree", ints(&[2, 3])),
            ("coef0", floats(&[1.0])),
        ],
        Algorithm::Svr(KernelKind::Tah) => vec![
            ("C", floats(&[0.1, 1.0])),
            ("epsilon", floats(&[0.01, 0.05])),
            ("kappa", floats(&[0.5, 1.0])),
            ("theta", floats(&[0.0])),
        ],
        Algorithm::Svr(KernelKind::Rbf) | Algorithm::Svr(KernelKind::Vs) => {
            let mut v = svr_base();
            v.push(("gamma", floats(&[0.5, 2.0])));
            v
        }
    };
    HyperGrid {
        algorithm,
        axes: axes(a),
    }
}

/// Per-algorithm axis overrides read from a TOML file:
///
/// ```toml
/// [KNN]
/// k = [1, 5, 50]
///
/// [SVR-RBF]
/// gamma = [0.1, 1.0]
/// ```
///
/// Listed axes replace the default values; axes not listed keep their
/// defaults; new axes are appended in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridOverrides {
    entries: Vec<(Algorithm, Vec<(String, Vec<ParamValue>)>)>,
}

impl GridOverrides {
    pub fn parse(text: &str) -> Result<Self, TuningError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| TuningError::Grid(e.to_string()))?;
        let mut entries = Vec::new();
        for (name, value) in table {
            let algorithm: Algorithm = name.parse().map_err(|e| TuningError::Grid(format!("{e}")))?;
            let toml::Value::Table(axes) = value else {
                return Err(TuningError::Grid(format!("[{name}] must be a table of value lists")));
            };
            let mut parsed = Vec::new();
            for (key, list) in axes {
                let values: Vec<ParamValue> = match list {
                    toml::Value::Array(items) => items.into_iter().map(|v| param_value(&name, &key, v)).collect::<Result<_, _>>()?,
                    single => vec![param_value(&name, &key, single)?],
                };
                parsed.push((key, values));
            }
            entries.push((algorithm, parsed));
        }
        Ok(GridOverrides { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TuningError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TuningError::Grid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Default grid with this file's overrides applied, validated.
    pub fn grid_for(&self, algorithm: Algorithm) -> Result<HyperGrid, TuningError> {
        let mut axes = default_grid(algorithm).axes;
        for (a, over) in &self.entries {
            if *a != algorithm {
                continue;
            }
            for (key, values) in over {
                match axes.iter_mut().find(|(k, _)| k == key) {
                    Some((_, v)) => *v = values.clone(),
                    None => axes.push((key.clone(), values.clone())),
                }
            }
        }
        HyperGrid::new(algorithm, axes)
    }
}

fn param_value(table: &str, key: &str, v: toml::Value) -> Result<ParamValue, TuningError> {
    match v {
        toml::Value::Integer(i) => Ok(ParamValue::Int(i)),
        toml::Value::Float(f) => Ok(ParamValue::Float(f)),
        toml::Value::String(s) => Ok(ParamValue::Text(s)),
        other => Err(TuningError::Grid(format!("[{table}] {key}: unsupported value {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for a in Algorithm::ALL {
            let g = default_grid(a);
            let configs = g.configs();
            assert_eq!(configs.len(), g.len());
            assert!(!configs.is_empty());
            for c in configs {
                c.validate().unwrap_or_else(|e| panic!("{a}: {e}"));
            }
        }
    }

    #[test]
    fn documented_defaults() {
        assert_eq!(default_grid(Algorithm::Knn).len(), 12);
        assert_eq!(default_grid(Algorithm::Nb).len(), 5);
        assert_eq!(default_grid(Algorithm::MlmRi).len(), 1);
        assert_eq!(default_grid(Algorithm::MlmRs).configs()[0].params.len(), 0);
    }

    #[test]
    fn row_major_order() {
        let configs = default_grid(Algorithm::Knn).configs();
        assert_eq!(configs[0].describe(), "k=1 weighting=uniform");
        assert_eq!(configs[1].describe(), "k=1 weighting=inverse_distance");
        assert_eq!(configs[2].describe(), "k=3 weighting=uniform");
    }

    #[test]
    fn overrides_merge() {
        let o = GridOverrides::parse("[KNN]\nk = [1, 5, 50]\n\n[svr-rbf]\ngamma = 1.5\ntolerance = [1e-4]\n").unwrap();
        let knn = o.grid_for(Algorithm::Knn).unwrap();
        assert_eq!(knn.len(), 6);
        let rbf = o.grid_for(Algorithm::Svr(KernelKind::Rbf)).unwrap();
        assert_eq!(rbf.len(), 6);
        assert_eq!(rbf.axes.last().unwrap().0, "tolerance");
        assert_eq!(o.grid_for(Algorithm::Nb).unwrap(), default_grid(Algorithm::Nb));
    }

    #[test]
    fn bad_overrides() {
        assert!(GridOverrides::parse("[XGB]\na = [1]").is_err());
        assert!(GridOverrides::parse("[KNN]\nk = [0]").unwrap().grid_for(Algorithm::Knn).is_err());
        assert!(GridOverrides::parse("[KNN]\nk = []").unwrap().grid_for(Algorithm::Knn).is_err());
        assert!(GridOverrides::parse("[KNN]\nbogus = [1]").unwrap().grid_for(Algorithm::Knn).is_err());
    }
}
