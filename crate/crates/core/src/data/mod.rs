//! Assignment records: ingest, cleaning, normalization, split plans,
//! predictor projections and the synthetic generator.

mod csv_io;
mod normalize;
mod split;
mod synth;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub use csv_io::{load_csv, write_csv, CSV_HEADER};
pub use normalize::{apply_normalizer, fit_normalizer, NormalizationScales, NormalizedData, Scope};
pub use split::{make_split_plan, make_split_plan_with, overlap_stats, OverlapStats, Partition, SplitPlan};
pub use synth::{generate_synthetic, ColumnTarget, SignalStrengths, SynthConfig};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("schema error: unexpected column `{0}`")]
    UnexpectedColumn(String),
    #[error("parse error at row {row}, column `{column}`: cannot parse {value:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("dataset is empty after cleaning")]
    EmptyDataset,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("need at least 2 partitions for overlap statistics")]
    TooFewPartitions,
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("invalid normalization scale for `{column}`: {value}")]
    InvalidScale { column: String, value: f64 },
}

/// Numeric columns of an assignment row, in the canonical feature order.
///
/// Objective (log-data) predictors come first, then the four questionnaire
/// scores, then the outcome. The combined predictor set uses exactly this
/// order, so the assignment-level columns sit at indices 0 and 1 in both the
/// objective and the combined projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    ClicksAssignment,
    IntervalDays,
    ClicksActivities,
    Gase,
    Sdls,
    Apss,
    Aps,
    Delay,
}

impl Column {
    pub const ALL: [Column; 8] = [
        Column::ClicksAssignment,
        Column::IntervalDays,
        Column::ClicksActivities,
        Column::Gase,
        Column::Sdls,
        Column::Apss,
        Column::Aps,
        Column::Delay,
    ];
    pub const FEATURES: [Column; 7] = [
        Column::ClicksAssignment,
        Column::IntervalDays,
        Column::ClicksActivities,
        Column::Gase,
        Column::Sdls,
        Column::Apss,
        Column::Aps,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Header name used in CSV files.
    pub fn csv_name(self) -> &'static str {
        match self {
            Column::ClicksAssignment => "clicks_assignment",
            Column::IntervalDays => "interval_days",
            Column::ClicksActivities => "clicks_activities",
            Column::Gase => "gase",
            Column::Sdls => "sdls",
            Column::Apss => "apss",
            Column::Aps => "aps",
            Column::Delay => "delay_days",
        }
    }

    pub fn from_name(name: &str) -> Option<Column> {
        let name = name.trim().to_ascii_lowercase();
        Column::ALL
            .into_iter()
            .find(|c| c.csv_name() == name || (name == "delay" && *c == Column::Delay))
    }
}

/// One complete assignment row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub student_id: String,
    pub course_id: String,
    pub assignment_id: String,
    pub gase: f64,
    pub sdls: f64,
    pub apss: f64,
    pub aps: f64,
    pub clicks_assignment: f64,
    pub interval_days: f64,
    pub clicks_activities: f64,
    /// Positive = late, zero or negative = on time (days).
    pub delay: f64,
}

impl AssignmentRecord {
    pub fn value(&self, column: Column) -> f64 {
        match column {
            Column::ClicksAssignment => self.clicks_assignment,
            Column::IntervalDays => self.interval_days,
            Column::ClicksActivities => self.clicks_activities,
            Column::Gase => self.gase,
            Column::Sdls => self.sdls,
            Column::Apss => self.apss,
            Column::Aps => self.aps,
            Column::Delay => self.delay,
        }
    }
}

/// A row as read from disk; any cell may be missing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawRecord {
    pub student_id: Option<String>,
    pub course_id: Option<String>,
    pub assignment_id: Option<String>,
    /// Indexed by [`Column::index`].
    pub values: [Option<f64>; 8],
}

impl RawRecord {
    pub fn from_complete(record: &AssignmentRecord) -> Self {
        let mut values = [None; 8];
        for c in Column::ALL {
            values[c.index()] = Some(record.value(c));
        }
        RawRecord {
            student_id: Some(record.student_id.clone()),
            course_id: Some(record.course_id.clone()),
            assignment_id: Some(record.assignment_id.clone()),
            values,
        }
    }

    fn complete(&self) -> Option<AssignmentRecord> {
        let v = |c: Column| self.values[c.index()].filter(|x| x.is_finite());
        let clicks_assignment = v(Column::ClicksAssignment).filter(|&x| x >= 1.0)?;
        let clicks_activities = v(Column::ClicksActivities).filter(|&x| x >= 0.0)?;
        let id = |s: &Option<String>| s.as_ref().filter(|s| !s.is_empty()).cloned();
        Some(AssignmentRecord {
            student_id: id(&self.student_id)?,
            course_id: id(&self.course_id)?,
            assignment_id: id(&self.assignment_id)?,
            gase: v(Column::Gase)?,
            sdls: v(Column::Sdls)?,
            apss: v(Column::Apss)?,
            aps: v(Column::Aps)?,
            clicks_assignment,
            interval_days: v(Column::IntervalDays)?,
            clicks_activities,
            delay: v(Column::Delay)?,
        })
    }
}

/// Non-empty collection of complete assignment rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    records: Vec<AssignmentRecord>,
}

impl Dataset {
    pub fn new(records: Vec<AssignmentRecord>) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        Ok(Dataset { records })
    }

    pub fn records(&self) -> &[AssignmentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn column(&self, column: Column) -> Vec<f64> {
        self.records.iter().map(|r| r.value(column)).collect()
    }

    /// Fraction of rows with `delay <= 0`.
    pub fn timely_fraction(&self) -> f64 {
        let timely = self.records.iter().filter(|r| r.delay <= 0.0).count();
        timely as f64 / self.len() as f64
    }

    /// Dense student/course indices in order of first appearance.
    pub fn groups(&self) -> GroupStructure {
        fn dense<'a>(ids: impl Iterator<Item = &'a str>) -> (Vec<usize>, usize) {
            let mut map: HashMap<&str, usize> = HashMap::new();
            let idx = ids
                .map(|id| {
                    let next = map.len();
                    *map.entry(id).or_insert(next)
                })
                .collect();
            (idx, map.len())
        }
        let (student, n_students) = dense(self.records.iter().map(|r| r.student_id.as_str()));
        let (course, n_courses) = dense(self.records.iter().map(|r| r.course_id.as_str()));
        GroupStructure {
            student,
            course,
            n_students,
            n_courses,
        }
    }
}

/// Drops rows with any missing (or out-of-domain) cell. Rows with fewer
/// than one assignment click or negative activity clicks count as
/// incomplete. Returns the cleaned dataset and the number of dropped rows.
pub fn drop_missing(records: Vec<RawRecord>) -> Result<(Dataset, usize), DataError> {
    let total = records.len();
    let kept: Vec<AssignmentRecord> = records.iter().filter_map(RawRecord::complete).collect();
    let dropped = total - kept.len();
    Ok((Dataset::new(kept)?, dropped))
}

/// Student and course membership per row, as dense indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    pub student: Vec<usize>,
    pub course: Vec<usize>,
    pub n_students: usize,
    pub n_courses: usize,
}

impl GroupStructure {
    pub fn len(&self) -> usize {
        self.student.len()
    }

    pub fn is_empty(&self) -> bool {
        self.student.is_empty()
    }

    /// Rows subset; the index spaces (and group counts) are preserved so
    /// that train and test subsets share identifiers.
    pub fn select_rows(&self, indices: &[usize]) -> GroupStructure {
        GroupStructure {
            student: indices.iter().map(|&i| self.student[i]).collect(),
            course: indices.iter().map(|&i| self.course[i]).collect(),
            n_students: self.n_students,
            n_courses: self.n_courses,
        }
    }

    /// Every row in one student and one course.
    pub fn single(n: usize) -> GroupStructure {
        GroupStructure {
            student: vec![0; n],
            course: vec![0; n],
            n_students: 1,
            n_courses: 1,
        }
    }
}

/// Which predictors a model sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PredictorSet {
    /// gase, sdls, apss, aps
    #[serde(rename = "subj")]
    Subj,
    /// clicks_assignment, interval_days, clicks_activities
    #[serde(rename = "obj")]
    Obj,
    /// the objective columns followed by the subjective ones
    #[serde(rename = "comb")]
    Comb,
}

impl PredictorSet {
    pub const ALL: [PredictorSet; 3] = [PredictorSet::Subj, PredictorSet::Obj, PredictorSet::Comb];

    pub fn columns(self) -> &'static [Column] {
        match self {
            PredictorSet::Subj => &Column::FEATURES[3..],
            PredictorSet::Obj => &Column::FEATURES[..3],
            PredictorSet::Comb => &Column::FEATURES,
        }
    }

    pub fn feature_names(self) -> Vec<&'static str> {
        self.columns().iter().map(|c| c.csv_name()).collect()
    }

    /// Projection indices of the assignment-level predictors
    /// (clicks_assignment, interval_days), used for random slopes.
    pub fn assignment_level_columns(self) -> Vec<usize> {
        match self {
            PredictorSet::Subj => vec![],
            PredictorSet::Obj | PredictorSet::Comb => vec![0, 1],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PredictorSet::Subj => "subj",
            PredictorSet::Obj => "obj",
            PredictorSet::Comb => "comb",
        }
    }

    pub fn from_label(s: &str) -> Option<PredictorSet> {
        PredictorSet::ALL.into_iter().find(|p| p.label() == s.trim().to_ascii_lowercase())
    }
}

/// Feature matrix and target for one predictor set. The target is the
/// normalized delay.
pub fn project(data: &NormalizedData, set: PredictorSet) -> (Matrix, Vec<f64>) {
    let cols: Vec<usize> = set.columns().iter().map(|c| c.index()).collect();
    (data.features.select_cols(&cols), data.delay.clone())
}

#[cfg(test)]
pub(crate) fn record(student: &str, course: &str, values: [f64; 8]) -> AssignmentRecord {
    AssignmentRecord {
        student_id: student.into(),
        course_id: course.into(),
        assignment_id: format!("{course}-1"),
        clicks_assignment: values[0],
        interval_days: values[1],
        clicks_activities: values[2],
        gase: values[3],
        sdls: values[4],
        apss: values[5],
        aps: values[6],
        delay: values[7],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(values: [Option<f64>; 8]) -> RawRecord {
        RawRecord {
            student_id: Some("s".into()),
            course_id: Some("c".into()),
            assignment_id: Some("a".into()),
            values,
        }
    }

    const FULL: [Option<f64>; 8] = [
        Some(3.0),
        Some(-2.0),
        Some(100.0),
        Some(20.0),
        Some(40.0),
        Some(10.0),
        Some(70.0),
        Some(-1.0),
    ];

    #[test]
    fn drop_missing_counts_incomplete_rows() {
        let mut rows = vec![raw(FULL); 5];
        rows[2].values[Column::Gase.index()] = None;
        let (ds, dropped) = drop_missing(rows).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn drop_missing_identity_when_complete() {
        let rows = vec![raw(FULL); 3];
        let (ds, dropped) = drop_missing(rows.clone()).unwrap();
        assert_eq!(dropped, 0);
        let back: Vec<RawRecord> = ds.records().iter().map(RawRecord::from_complete).collect();
        assert_eq!(back, rows);
    }

    #[test]
    fn drop_missing_all_incomplete_is_error() {
        let mut r = raw(FULL);
        r.student_id = None;
        assert!(matches!(drop_missing(vec![r; 3]), Err(DataError::EmptyDataset)));
    }

    #[test]
    fn out_of_domain_clicks_are_dropped() {
        let mut r = raw(FULL);
        r.values[Column::ClicksAssignment.index()] = Some(0.0);
        let (ds, dropped) = drop_missing(vec![r, raw(FULL)]).unwrap();
        assert_eq!((ds.len(), dropped), (1, 1));
    }

    #[test]
    fn predictor_sets_have_documented_widths_and_order() {
        assert_eq!(PredictorSet::Subj.columns().len(), 4);
        assert_eq!(PredictorSet::Obj.columns().len(), 3);
        assert_eq!(PredictorSet::Comb.columns().len(), 7);
        let comb = PredictorSet::Comb.columns();
        assert_eq!(&comb[..3], PredictorSet::Obj.columns());
        assert_eq!(&comb[3..], PredictorSet::Subj.columns());
    }

    #[test]
    fn groups_are_dense_in_first_appearance_order() {
        let v = [1.0, 0.0, 0.0, 20.0, 40.0, 10.0, 70.0, 1.0];
        let ds = Dataset::new(vec![
            record("b", "x", v),
            record("a", "x", v),
            record("b", "y", v),
        ])
        .unwrap();
        let g = ds.groups();
        assert_eq!(g.student, vec![0, 1, 0]);
        assert_eq!(g.course, vec![0, 0, 1]);
        assert_eq!((g.n_students, g.n_courses), (2, 2));
    }
}
