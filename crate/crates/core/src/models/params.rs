//! Loosely typed hyperparameter maps and the readers that turn them into
//! per-family parameter structs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// One hyperparameter value as it appears in a grid or config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v:?}"),
            ParamValue::Text(v) => f.write_str(v),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

pub type Params = BTreeMap<String, ParamValue>;

/// Renders `k=v` pairs in key order, e.g. `k=5 weighting=uniform`.
pub fn describe(params: &Params) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Typed access to a parameter map; rejects keys the family does not know.
pub(crate) struct Reader<'a> {
    params: &'a Params,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(params: &'a Params, allowed: &[&str]) -> Result<Self, ModelError> {
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ModelError::InvalidParam(format!("unknown parameter `{k}`")));
        }
        Ok(Reader { params })
    }

    fn get(&self, key: &str) -> Result<&'a ParamValue, ModelError> {
        self.params
            .get(key)
            .ok_or_else(|| ModelError::InvalidParam(format!("missing parameter `{key}`")))
    }

    pub(crate) fn f64(&self, key: &str) -> Result<f64, ModelError> {
        match self.get(key)? {
            ParamValue::Float(v) if v.is_finite() => Ok(*v),
            ParamValue::Int(v) => Ok(*v as f64),
            other => Err(ModelError::InvalidParam(format!("`{key}` must be a finite number, got {other}"))),
        }
    }

    pub(crate) fn f64_or(&self, key: &str, default: f64) -> Result<f64, ModelError> {
        if self.params.contains_key(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    pub(crate) fn usize(&self, key: &str) -> Result<usize, ModelError> {
        match self.get(key)? {
            ParamValue::Int(v) if *v >= 0 => Ok(*v as usize),
            other => Err(ModelError::InvalidParam(format!("`{key}` must be a non-negative integer, got {other}"))),
        }
    }

    pub(crate) fn text(&self, key: &str) -> Result<&'a str, ModelError> {
        match self.get(key)? {
            ParamValue::Text(s) => Ok(s.as_str()),
            other => Err(ModelError::InvalidParam(format!("`{key}` must be text, got {other}"))),
        }
    }
}

pub(crate) fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<(), ModelError> {
    if condition {
        Ok(())
    } else {
        Err(ModelError::InvalidParam(message()))
    }
}
