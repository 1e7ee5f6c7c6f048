//! Aggregation of per-split results into comparison tables.
//!
//! All stored values are raw ratios. Percentages, rounding and best-cell
//! flags appear only when a table is rendered, so re-emitting the same
//! [`ExperimentReport`] always produces byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::PredictorSet;
use crate::metrics::MetricReport;
use crate::models::{Algorithm, HyperConfig};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("aggregation needs at least 2 entries, got {0}")]
    TooFewEntries(usize),
    #[error("report is incomplete; missing cells:\n  {}", .0.join("\n  "))]
    Incomplete(Vec<String>),
    #[error("report is inconsistent: {0}")]
    Inconsistent(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Outcome of grid-search cross-validation on one training partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub best_config: HyperConfig,
    pub mean_g: f64,
    pub sd_g: f64,
    pub n_configs: usize,
    pub n_failed: usize,
}

/// One (algorithm, predictor set, split) cell of the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub predictor_set: PredictorSet,
    pub split: usize,
    pub seed: u64,
    pub cv: CvSummary,
    pub test: MetricReport,
    /// Normalized feature importance, in the predictor set's column order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<Vec<f64>>,
}

/// Run-level facts written to `meta.json`. Deliberately free of timings and
/// absolute paths so that it is reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub master_seed: u64,
    pub config_hash: String,
    pub data_source: String,
    pub n_rows: usize,
    pub n_dropped: usize,
    pub timely_fraction: f64,
    pub normalization: String,
    pub train_size: usize,
    pub test_size: usize,
    pub folds: usize,
    pub mean_test_overlap: f64,
    pub grid_sizes: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub meta: RunMeta,
    pub algorithms: Vec<Algorithm>,
    pub predictor_sets: Vec<PredictorSet>,
    pub n_splits: usize,
    pub entries: Vec<CellResult>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate, ReportError> {
    let n = values.len();
    if n < 2 {
        return Err(ReportError::TooFewEntries(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(Aggregate {
        mean,
        sd: (ss / (n - 1) as f64).sqrt(),
        n,
    })
}

/// A per-split quantity that can be aggregated over splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Ppv,
    Tpr,
    FTp,
    FTn,
    Mcc,
    Acc,
    Mae,
    TestG,
    CvG,
}

impl Metric {
    pub const INTRA: [Metric; 7] = [
        Metric::Ppv,
        Metric::Tpr,
        Metric::FTp,
        Metric::FTn,
        Metric::Mcc,
        Metric::Acc,
        Metric::Mae,
    ];

    pub fn of(self, cell: &CellResult) -> f64 {
        let t = &cell.test;
        match self {
            Metric::Ppv => t.ppv,
            Metric::Tpr => t.tpr,
            Metric::FTp => t.f_tp,
            Metric::FTn => t.f_tn,
            Metric::Mcc => t.mcc,
            Metric::Acc => t.acc,
            Metric::Mae => t.mae,
            Metric::TestG => t.g,
            Metric::CvG => cell.cv.mean_g,
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Metric::Ppv => "PPV (SD) [%]",
            Metric::Tpr => "TPR (SD) [%]",
            Metric::FTp => "F_tp (SD) [%]",
            Metric::FTn => "F_tn (SD) [%]",
            Metric::Mcc => "MCC (SD) [%]",
            Metric::Acc => "ACC (SD) [%]",
            Metric::Mae => "MAE (SD)",
            Metric::TestG => "Test G (SD)",
            Metric::CvG => "CV G (SD)",
        }
    }

    /// Lower is better only for the regression error.
    pub fn lower_is_better(self) -> bool {
        self == Metric::Mae
    }

    fn format(self, a: Aggregate) -> String {
        match self {
            Metric::TestG | Metric::CvG => format!("{:.4} ({:.4})", a.mean, a.sd),
            _ => format!("{:.2} ({:.2})", 100.0 * a.mean, 100.0 * a.sd),
        }
    }
}

impl ExperimentReport {
    /// Entries of one (algorithm, predictor set) cell, ordered by split.
    pub fn cell_entries(&self, algorithm: Algorithm, set: PredictorSet) -> Vec<&CellResult> {
        let mut cells: Vec<&CellResult> = self
            .entries
            .iter()
            .filter(|e| e.algorithm == algorithm && e.predictor_set == set)
            .collect();
        cells.sort_by_key(|e| e.split);
        cells
    }

    /// Every (algorithm, set) pair has exactly one entry per split and no
    /// entry falls outside the declared grid.
    pub fn check_complete(&self) -> Result<(), ReportError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !self.algorithms.contains(&e.algorithm)
                || !self.predictor_sets.contains(&e.predictor_set)
                || e.split >= self.n_splits
            {
                return Err(ReportError::Inconsistent(format!(
                    "entry {}/{}/split {} is outside the declared run",
                    e.algorithm,
                    e.predictor_set.label(),
                    e.split
                )));
            }
            if !seen.insert((e.algorithm, e.predictor_set, e.split)) {
                return Err(ReportError::Inconsistent(format!(
                    "duplicate entry {}/{}/split {}",
                    e.algorithm,
                    e.predictor_set.label(),
                    e.split
                )));
            }
        }
        let mut missing = Vec::new();
        if self.algorithms.is_empty() || self.predictor_sets.is_empty() || self.n_splits == 0 {
            missing.push("report declares no algorithms, predictor sets or splits".to_string());
        }
        for &alg in &self.algorithms {
            for &set in &self.predictor_sets {
                let absent: Vec<String> = (0..self.n_splits)
                    .filter(|s| !seen.contains(&(alg, set, *s)))
                    .map(|s| s.to_string())
                    .collect();
                if !absent.is_empty() {
                    missing.push(format!("{alg}/{}: splits {}", set.label(), absent.join(",")));
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ReportError::Incomplete(missing))
        }
    }

    pub fn aggregate_metric(&self, algorithm: Algorithm, set: PredictorSet, metric: Metric) -> Result<Aggregate, ReportError> {
        let values: Vec<f64> = self.cell_entries(algorithm, set).iter().map(|e| metric.of(e)).collect();
        aggregate(&values)
    }

    /// Algorithm with the highest mean test G for a predictor set; ties go
    /// to the earlier algorithm in the declared order.
    pub fn winner(&self, set: PredictorSet) -> Result<Algorithm, ReportError> {
        let mut best: Option<(Algorithm, f64)> = None;
        for &alg in &self.algorithms {
            let g = self.aggregate_metric(alg, set, Metric::TestG)?.mean;
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((alg, g));
            }
        }
        best.map(|(a, _)| a)
            .ok_or_else(|| ReportError::Incomplete(vec!["report declares no algorithms".into()]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapRow {
    pub algorithm: Algorithm,
    pub predictor_set: PredictorSet,
    pub cv_mean_g: f64,
    pub test_mean_g: f64,
    /// `cv_mean_g - test_mean_g`
    pub gap: f64,
}

/// Signed CV-minus-test G gap per cell, sorted by absolute gap (smallest
/// first) with ties kept in declaration order.
pub fn cv_test_gap(report: &ExperimentReport) -> Result<Vec<GapRow>, ReportError> {
    report.check_complete()?;
    let mut rows = Vec::new();
    for &alg in &report.algorithms {
        for &set in &report.predictor_sets {
            let cv = report.aggregate_metric(alg, set, Metric::CvG)?.mean;
            let test = report.aggregate_metric(alg, set, Metric::TestG)?.mean;
            rows.push(GapRow {
                algorithm: alg,
                predictor_set: set,
                cv_mean_g: cv,
                test_mean_g: test,
                gap: cv - test,
            });
        }
    }
    rows.sort_by(|a, b| a.gap.abs().total_cmp(&b.gap.abs()));
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableCell {
    pub text: String,
    pub best: bool,
}

impl TableCell {
    fn plain(text: impl Into<String>) -> Self {
        TableCell {
            text: text.into(),
            best: false,
        }
    }
}

/// A rendered-but-unformatted table: header strings and cell text.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File stem inside the report directory.
    pub name: String,
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<TableCell>>,
}

impl Table {
    /// CSV with the same cell text as the Markdown form; the best cell of a
    /// column carries a trailing `*`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let line = |fields: Vec<String>| fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",");
        out.push_str(&line(self.headers.clone()));
        out.push('\n');
        for row in &self.rows {
            let fields = row
                .iter()
                .map(|c| if c.best { format!("{}*", c.text) } else { c.text.clone() })
                .collect();
            out.push_str(&line(fields));
            out.push('\n');
        }
        out
    }

    /// GitHub-flavored Markdown; the best cell of a column is bold.
    pub fn to_markdown(&self) -> String {
        let mut out = format!("## {}\n\n", self.title);
        let _ = writeln!(out, "| {} |", self.headers.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.headers.len()));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| if c.best { format!("**{}**", c.text) } else { c.text.clone() })
                .collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Markdown => self.to_markdown(),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Flags the best cell(s) of one column; exact ties are all flagged.
fn flag_best(cells: &mut [TableCell], means: &[f64], lower_is_better: bool) {
    let best = means
        .iter()
        .copied()
        .filter(|m| m.is_finite())
        .fold(None, |acc: Option<f64>, m| match acc {
            None => Some(m),
            Some(b) if (lower_is_better && m < b) || (!lower_is_better && m > b) => Some(m),
            keep => keep,
        });
    if let Some(b) = best {
        for (cell, m) in cells.iter_mut().zip(means) {
            cell.best = *m == b;
        }
    }
}

/// Builds a table whose first column(s) are labels and whose remaining
/// columns are aggregated metrics, flagging the best cell per column.
fn metric_table(
    name: String,
    title: String,
    label_headers: Vec<String>,
    labels: Vec<Vec<String>>,
    columns: Vec<(String, Metric, Vec<Aggregate>)>,
) -> Table {
    let n_rows = labels.len();
    let mut rows: Vec<Vec<TableCell>> = labels
        .into_iter()
        .map(|l| l.into_iter().map(TableCell::plain).collect())
        .collect();
    let mut headers = label_headers;
    for (header, metric, aggs) in columns {
        headers.push(header);
        let mut cells: Vec<TableCell> = aggs.iter().map(|a| TableCell::plain(metric.format(*a))).collect();
        let means: Vec<f64> = aggs.iter().map(|a| a.mean).collect();
        flag_best(&mut cells, &means, metric.lower_is_better());
        debug_assert_eq!(cells.len(), n_rows);
        for (row, cell) in rows.iter_mut().zip(cells) {
            row.push(cell);
        }
    }
    Table {
        name,
        title,
        headers,
        rows,
    }
}

/// CV versus test G per algorithm and predictor set.
pub fn gscore_table(report: &ExperimentReport) -> Result<Table, ReportError> {
    let mut columns = Vec::new();
    for (phase, metric) in [("CV", Metric::CvG), ("Test", Metric::TestG)] {
        for &set in &report.predictor_sets {
            let aggs = report
                .algorithms
                .iter()
                .map(|&a| report.aggregate_metric(a, set, metric))
                .collect::<Result<Vec<_>, _>>()?;
            columns.push((format!("{phase} {}", set.label()), metric, aggs));
        }
    }
    Ok(metric_table(
        "gscores".into(),
        "Mean G-Score (SD), cross-validation vs test".into(),
        vec!["ML Alg.".into()],
        report.algorithms.iter().map(|a| vec![a.label().to_string()]).collect(),
        columns,
    ))
}

/// Test metrics of every algorithm on one predictor set.
pub fn intra_table(report: &ExperimentReport, set: PredictorSet) -> Result<Table, ReportError> {
    let mut columns = Vec::new();
    for metric in Metric::INTRA {
        let aggs = report
            .algorithms
            .iter()
            .map(|&a| report.aggregate_metric(a, set, metric))
            .collect::<Result<Vec<_>, _>>()?;
        columns.push((metric.header().to_string(), metric, aggs));
    }
    Ok(metric_table(
        format!("intra_{}", set.label()),
        format!("Intra-model comparison ({})", set.label()),
        vec!["ML Alg.".into()],
        report.algorithms.iter().map(|a| vec![a.label().to_string()]).collect(),
        columns,
    ))
}

/// Test metrics of the winning algorithm per predictor set.
pub fn inter_table(report: &ExperimentReport) -> Result<Table, ReportError> {
    let winners = report
        .predictor_sets
        .iter()
        .map(|&s| report.winner(s).map(|a| (s, a)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut columns = Vec::new();
    for metric in Metric::INTRA {
        let aggs = winners
            .iter()
            .map(|&(s, a)| report.aggregate_metric(a, s, metric))
            .collect::<Result<Vec<_>, _>>()?;
        columns.push((metric.header().to_string(), metric, aggs));
    }
    Ok(metric_table(
        "inter".into(),
        "Inter-model comparison of the highest-performing algorithm per predictor type".into(),
        vec!["Pred type".into(), "ML Alg.".into()],
        winners
            .iter()
            .map(|(s, a)| vec![s.label().to_string(), a.label().to_string()])
            .collect(),
        columns,
    ))
}

/// Mean normalized importance per feature for every algorithm and set
/// that recorded one. Features absent from a set show `-`.
pub fn importance_table(report: &ExperimentReport) -> Result<Table, ReportError> {
    let mut features: Vec<&'static str> = Vec::new();
    for set in PredictorSet::ALL {
        for name in set.feature_names() {
            if !features.contains(&name) {
                features.push(name);
            }
        }
    }
    let mut headers = vec!["Feature".to_string()];
    let mut rows: Vec<Vec<TableCell>> = features.iter().map(|f| vec![TableCell::plain(*f)]).collect();
    for &alg in &report.algorithms {
        for &set in &report.predictor_sets {
            let entries = report.cell_entries(alg, set);
            if entries.is_empty() || entries.iter().any(|e| e.importance.is_none()) {
                continue;
            }
            let names = set.feature_names();
            headers.push(format!("{alg} {} (SD) [%]", set.label()));
            let mut cells = Vec::with_capacity(features.len());
            let mut means = Vec::with_capacity(features.len());
            for f in &features {
                match names.iter().position(|n| n == f) {
                    Some(j) => {
                        let values = entries
                            .iter()
                            .map(|e| {
                                let imp = e.importance.as_ref().expect("checked above");
                                imp.get(j).copied().ok_or_else(|| {
                                    ReportError::Inconsistent(format!(
                                        "{alg}/{}/split {}: importance has {} entries, expected {}",
                                        set.label(),
                                        e.split,
                                        imp.len(),
                                        names.len()
                                    ))
                                })
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        let a = aggregate(&values)?;
                        cells.push(TableCell::plain(Metric::Ppv.format(a)));
                        means.push(a.mean);
                    }
                    None => {
                        cells.push(TableCell::plain("-"));
                        means.push(f64::NAN);
                    }
                }
            }
            flag_best(&mut cells, &means, false);
            for (row, cell) in rows.iter_mut().zip(cells) {
                row.push(cell);
            }
        }
    }
    Ok(Table {
        name: "importance".into(),
        title: "Mean normalized feature importance (SD) [%]".into(),
        headers,
        rows,
    })
}

/// All comparison tables, in emission order.
pub fn build_tables(report: &ExperimentReport) -> Result<Vec<Table>, ReportError> {
    report.check_complete()?;
    let mut tables = vec![gscore_table(report)?];
    for &set in &report.predictor_sets {
        tables.push(intra_table(report, set)?);
    }
    tables.push(inter_table(report)?);
    tables.push(importance_table(report)?);
    Ok(tables)
}

/// Writes every table in the requested format(s) plus `meta.json` into
/// `dir`, returning the written paths.
pub fn emit_tables(report: &ExperimentReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, ReportError> {
    let tables = build_tables(report)?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for table in &tables {
        for &format in formats {
            let path = dir.join(format!("{}.{}", table.name, format.extension()));
            fs::write(&path, table.render(format)).map_err(io(&path))?;
            written.push(path);
        }
    }
    let meta_path = dir.join("meta.json");
    let meta = MetaFile {
        meta: &report.meta,
        algorithms: &report.algorithms,
        predictor_sets: &report.predictor_sets,
        n_splits: report.n_splits,
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&meta_path, text).map_err(io(&meta_path))?;
    written.push(meta_path);
    Ok(written)
}

#[derive(Serialize)]
struct MetaFile<'a> {
    #[serde(flatten)]
    meta: &'a RunMeta,
    algorithms: &'a [Algorithm],
    predictor_sets: &'a [PredictorSet],
    n_splits: usize,
}
