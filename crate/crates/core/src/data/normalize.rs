use serde::{Deserialize, Serialize};

use super::{Column, DataError, Dataset, GroupStructure};
use crate::matrix::Matrix;

/// Rows used to fit the max-absolute scales.
#[derive(Clone, Copy, Debug)]
pub enum Scope<'a> {
    /// Every row of the dataset (normalize before splitting).
    AllRows,
    /// Only the given training rows; test rows may then fall outside
    /// `[-1, 1]` and are left unclamped.
    TrainOnly(&'a [usize]),
}

/// Per-column max-absolute scales, indexed by [`Column::index`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationScales {
    scales: [f64; 8],
}

impl NormalizationScales {
    pub fn new(scales: [f64; 8]) -> Result<Self, DataError> {
        for c in Column::ALL {
            let v = scales[c.index()];
            if !(v.is_finite() && v > 0.0) {
                return Err(DataError::InvalidScale {
                    column: c.csv_name().into(),
                    value: v,
                });
            }
        }
        Ok(NormalizationScales { scales })
    }

    pub fn scale(&self, column: Column) -> f64 {
        self.scales[column.index()]
    }

    /// Leaves `column` unnormalized (scale 1).
    pub fn without(mut self, column: Column) -> Self {
        self.scales[column.index()] = 1.0;
        self
    }

    /// Maximum absolute delay in days; `E` is measured relative to it, which
    /// is 1 in normalized units.
    pub fn delay_scale(&self) -> f64 {
        self.scale(Column::Delay)
    }

    pub fn denormalize(&self, column: Column, value: f64) -> f64 {
        value * self.scale(column)
    }
}

/// Max-absolute scale per column over the rows in `scope`. A column whose
/// values are all zero gets scale 1.
pub fn fit_normalizer(dataset: &Dataset, scope: Scope<'_>) -> NormalizationScales {
    let mut scales = [0.0f64; 8];
    let mut visit = |r: &super::AssignmentRecord| {
        for c in Column::ALL {
            scales[c.index()] = scales[c.index()].max(r.value(c).abs());
        }
    };
    match scope {
        Scope::AllRows => dataset.records().iter().for_each(&mut visit),
        Scope::TrainOnly(rows) => rows.iter().for_each(|&i| visit(&dataset.records()[i])),
    }
    for s in &mut scales {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    NormalizationScales { scales }
}

/// Normalized feature matrix (canonical column order), target and groups.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedData {
    /// `n × 7`, columns in [`Column::FEATURES`] order.
    pub features: Matrix,
    pub delay: Vec<f64>,
    pub groups: GroupStructure,
    pub scales: NormalizationScales,
}

impl NormalizedData {
    pub fn len(&self) -> usize {
        self.delay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delay.is_empty()
    }

    /// Original-unit values per row, `[features..., delay]`.
    pub fn denormalized_rows(&self) -> Vec<[f64; 8]> {
        (0..self.len())
            .map(|i| {
                let mut out = [0.0; 8];
                for (j, c) in Column::FEATURES.iter().enumerate() {
                    out[j] = self.scales.denormalize(*c, self.features.get(i, j));
                }
                out[7] = self.scales.denormalize(Column::Delay, self.delay[i]);
                out
            })
            .collect()
    }
}

/// Divides every column by its scale. Values outside `[-1, 1]` (possible
/// with train-only scales) are kept as is.
pub fn apply_normalizer(dataset: &Dataset, scales: &NormalizationScales) -> NormalizedData {
    let n = dataset.len();
    let mut features = Matrix::zeros(n, Column::FEATURES.len());
    let mut delay = Vec::with_capacity(n);
    for (i, r) in dataset.records().iter().enumerate() {
        for (j, c) in Column::FEATURES.iter().enumerate() {
            features.set(i, j, r.value(*c) / scales.scale(*c));
        }
        delay.push(r.delay / scales.delay_scale());
    }
    NormalizedData {
        features,
        delay,
        groups: dataset.groups(),
        scales: scales.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::record;
    use proptest::prelude::*;

    fn ds(rows: &[[f64; 8]]) -> Dataset {
        Dataset::new(rows.iter().map(|v| record("s", "c", *v)).collect()).unwrap()
    }

    #[test]
    fn interval_range_from_table_extremes() {
        let d = ds(&[
            [1.0, -150.30, 0.0, 8.0, 18.0, 5.0, 43.0, -113.51],
            [34.0, 98.72, 1237.0, 25.0, 50.0, 21.0, 104.0, 132.43],
        ]);
        let s = fit_normalizer(&d, Scope::AllRows);
        assert_eq!(s.scale(Column::IntervalDays), 150.30);
        let n = apply_normalizer(&d, &s);
        assert_eq!(n.features.get(0, 1), -1.0);
        assert!((n.features.get(1, 1) - 0.6568).abs() < 5e-5);
        // delay at its own max maps to exactly 1
        assert_eq!(n.delay[1], 1.0);
        assert_eq!(s.delay_scale(), 132.43);
    }

    #[test]
    fn all_zero_column_gets_unit_scale() {
        let d = ds(&[[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]; 3]);
        let s = fit_normalizer(&d, Scope::AllRows);
        assert_eq!(s.scale(Column::IntervalDays), 1.0);
        assert_eq!(apply_normalizer(&d, &s).features.get(0, 1), 0.0);
    }

    #[test]
    fn single_value_normalizes_to_one() {
        let d = ds(&[[34.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]]);
        let s = fit_normalizer(&d, Scope::AllRows);
        assert_eq!(s.scale(Column::ClicksAssignment), 34.0);
        assert_eq!(apply_normalizer(&d, &s).features.get(0, 0), 1.0);
    }

    #[test]
    fn train_only_scope_does_not_clamp_test_values() {
        let d = ds(&[
            [1.0, -150.30, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, 200.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ]);
        let s = fit_normalizer(&d, Scope::TrainOnly(&[0]));
        assert_eq!(s.scale(Column::IntervalDays), 150.30);
        let n = apply_normalizer(&d, &s);
        assert!((n.features.get(1, 1) - 1.3307).abs() < 5e-5);
    }

    #[test]
    fn zero_stays_zero_and_invalid_scale_rejected() {
        let d = ds(&[[1.0, 0.0, 5.0, 1.0, 1.0, 1.0, 1.0, 0.0], [2.0, 3.0, 5.0, 1.0, 1.0, 1.0, 1.0, 4.0]]);
        let n = apply_normalizer(&d, &fit_normalizer(&d, Scope::AllRows));
        assert_eq!(n.delay[0], 0.0);
        assert!(NormalizationScales::new([1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_and_unit_range(rows in prop::collection::vec(prop::array::uniform8(-1e4f64..1e4), 1..40)) {
            let mut rows = rows;
            for r in &mut rows {
                r[0] = r[0].abs().max(1.0);
                r[2] = r[2].abs();
            }
            let d = ds(&rows);
            let n = apply_normalizer(&d, &fit_normalizer(&d, Scope::AllRows));
            for v in n.features.as_slice().iter().chain(&n.delay) {
                prop_assert!(v.abs() <= 1.0);
            }
            for (orig, back) in rows.iter().zip(n.denormalized_rows()) {
                for k in 0..8 {
                    let tol = 1e-12 * orig[k].abs().max(f64::MIN_POSITIVE);
                    prop_assert!((orig[k] - back[k]).abs() <= tol, "{} vs {}", orig[k], back[k]);
                }
            }
        }
    }
}
