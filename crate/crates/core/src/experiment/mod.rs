//! End-to-end experiment orchestration: configuration, the per-cell
//! train/tune/test pipeline, on-disk persistence and resumption.
//!
//! A *cell* is one (split, predictor set, algorithm) triple. Each finished
//! cell is written to `<out>/cells/<key>.json` together with a fingerprint
//! of every input that influences it, so an interrupted run picks up where
//! it stopped and a changed configuration recomputes only what it affects.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    apply_normalizer, drop_missing, fit_normalizer, generate_synthetic, load_csv, make_split_plan_with, overlap_stats,
    project, write_csv, DataError, Dataset, NormalizedData, PredictorSet, Scope, SplitPlan, SynthConfig,
};
use crate::metrics::{evaluate, MetricsError};
use crate::models::{fit, Algorithm, Family, ModelError, TrainedModel, TrainingData};
use crate::report::{emit_tables, CellResult, CvSummary, ExperimentReport, Format, ReportError, RunMeta, Table, TableCell};
use crate::rng::{derive_seed_str, fnv1a};
use crate::tuning::{cross_validate, GridOverrides, HyperGrid, TuningError};

/// Normalized delays lie in `[-1, 1]`, so `E` is measured against 1.
const NORMALIZED_Y_MAX: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tuning(#[from] TuningError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError {
    let path = path.to_path_buf();
    move |source| ExperimentError::Io { path, source }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Scales fitted on the whole cleaned dataset before splitting.
    #[default]
    AllRows,
    /// Scales refitted on each split's training rows.
    TrainOnly,
}

impl Normalization {
    pub fn label(self) -> &'static str {
        match self {
            Normalization::AllRows => "all_rows",
            Normalization::TrainOnly => "train_only",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Synth,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub source: DataSource,
    /// CSV input, relative to the configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synth: SynthConfig,
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_sets() -> Vec<PredictorSet> {
    PredictorSet::ALL.to_vec()
}

fn default_folds() -> usize {
    4
}

fn default_splits() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

/// Contents of the run configuration file (TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; required, either here or on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_sets")]
    pub predictor_sets: Vec<PredictorSet>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_splits")]
    pub n_splits: usize,
    /// Grid override file, relative to the configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_overrides: Option<PathBuf>,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Write every final model to `<out>/models/`.
    #[serde(default = "default_true")]
    pub save_models: bool,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            algorithms: default_algorithms(),
            predictor_sets: default_sets(),
            folds: default_folds(),
            n_splits: default_splits(),
            grid_overrides: None,
            normalization: Normalization::default(),
            output_dir: default_output(),
            save_models: true,
            data: DataConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ExperimentError> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, if base.as_os_str().is_empty() { PathBuf::from(".") } else { base })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn master_seed(&self) -> Result<u64, ExperimentError> {
        self.seed
            .ok_or_else(|| ExperimentError::Config("a master seed is required (`seed = ...` or --seed)".into()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.master_seed()?;
        let bad = |m: &str| Err(ExperimentError::Config(m.into()));
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required");
        }
        if self.predictor_sets.is_empty() {
            return bad("at least one predictor set is required");
        }
        if has_duplicates(&self.algorithms) || has_duplicates(&self.predictor_sets) {
            return bad("algorithms and predictor sets must not repeat");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if self.n_splits < 2 {
            return bad("n_splits must be at least 2 (results are reported as mean and SD over splits)");
        }
        match self.data.source {
            DataSource::Csv if self.data.path.is_none() => bad("data.source = \"csv\" needs data.path"),
            DataSource::Synth => Ok(self.data.synth.validate()?),
            DataSource::Csv => Ok(()),
        }
    }

    pub fn grids(&self) -> Result<Vec<HyperGrid>, ExperimentError> {
        let overrides = match &self.grid_overrides {
            Some(p) => GridOverrides::load(self.resolve(p))?,
            None => GridOverrides::default(),
        };
        Ok(self
            .algorithms
            .iter()
            .map(|&a| overrides.grid_for(a))
            .collect::<Result<_, _>>()?)
    }
}

fn has_duplicates<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().any(|(i, a)| v[..i].contains(a))
}

/// Seed of the synthetic dataset, independent of everything but the master
/// seed.
pub fn data_seed(master: u64) -> u64 {
    derive_seed_str(master, "data")
}

/// Generates the configured synthetic dataset and writes it as CSV.
pub fn cmd_synth(config: &RunConfig, path: &Path) -> Result<Dataset, ExperimentError> {
    let seed = config.master_seed()?;
    config.data.synth.validate()?;
    let dataset = generate_synthetic(&config.data.synth, data_seed(seed))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    write_csv(path, &dataset)?;
    Ok(dataset)
}

/// Identity of one (split, predictor set, algorithm) cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub split: usize,
    pub set: PredictorSet,
    pub algorithm: Algorithm,
}

impl CellKey {
    /// Human-readable label, also the seed-derivation label.
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.split, self.set.label(), self.algorithm)
    }

    pub fn file_stem(&self) -> String {
        format!("split{:02}_{}_{}", self.split, self.set.label(), self.algorithm)
    }

    pub fn seed(&self, master: u64) -> u64 {
        derive_seed_str(master, &self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok { result: CellResult },
    Failed { error: String },
}

/// Contents of `<out>/cells/<key>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub key: String,
    pub fingerprint: String,
    pub seconds: f64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

/// Contents of `<out>/run.json`: what `report` needs to re-emit tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub meta: RunMeta,
    pub algorithms: Vec<Algorithm>,
    pub predictor_sets: Vec<PredictorSet>,
    pub n_splits: usize,
    pub cells: Vec<String>,
    pub failures: Vec<CellFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Done { test_g: f64 },
    Resumed,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProgressEvent {
    pub finished: usize,
    pub total: usize,
    pub cell: String,
    pub seconds: f64,
    pub status: CellStatus,
}

pub struct RunOptions<'a> {
    pub formats: Vec<Format>,
    pub progress: Option<&'a (dyn Fn(&ProgressEvent) + Sync)>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            formats: vec![Format::Csv, Format::Markdown],
            progress: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub failures: Vec<CellFailure>,
    pub resumed: usize,
    /// Report files written; empty when cells failed.
    pub emitted: Vec<PathBuf>,
}

struct LoadedData {
    dataset: Dataset,
    n_dropped: usize,
    source: String,
    fingerprint: u64,
}

fn load_data(config: &RunConfig, seed: u64) -> Result<LoadedData, ExperimentError> {
    match config.data.source {
        DataSource::Synth => {
            let dataset = generate_synthetic(&config.data.synth, data_seed(seed))?;
            let fingerprint = fnv1a(serde_json::to_string(&(&config.data.synth, seed))?.as_bytes());
            Ok(LoadedData {
                dataset,
                n_dropped: 0,
                source: "synth".into(),
                fingerprint,
            })
        }
        DataSource::Csv => {
            let path = config.resolve(config.data.path.as_deref().expect("validated"));
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let (dataset, n_dropped) = drop_missing(load_csv(&path)?)?;
            Ok(LoadedData {
                dataset,
                n_dropped,
                source: "csv".into(),
                fingerprint: fnv1a(&bytes),
            })
        }
    }
}

struct RunContext<'a> {
    config: &'a RunConfig,
    seed: u64,
    plan: SplitPlan,
    /// One entry for all-rows scaling, one per split otherwise.
    normalized: Vec<NormalizedData>,
    grids: BTreeMap<Algorithm, HyperGrid>,
    data_fingerprint: u64,
}

impl RunContext<'_> {
    fn normalized(&self, split: usize) -> &NormalizedData {
        match self.config.normalization {
            Normalization::AllRows => &self.normalized[0],
            Normalization::TrainOnly => &self.normalized[split],
        }
    }

    fn fingerprint(&self, key: &CellKey) -> Result<String, ExperimentError> {
        let grid: Vec<String> = self.grids[&key.algorithm].configs().iter().map(|c| c.describe()).collect();
        let input = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "data": format!("{:016x}", self.data_fingerprint),
            "seed": self.seed,
            "normalization": self.config.normalization,
            "folds": self.config.folds,
            "n_splits": self.config.n_splits,
            "cell": key.label(),
            "grid": grid,
        });
        Ok(format!("{:016x}", fnv1a(serde_json::to_string(&input)?.as_bytes())))
    }

    fn run_cell(&self, key: &CellKey) -> Result<(CellResult, TrainedModel), ExperimentError> {
        let cell_seed = key.seed(self.seed);
        let data = self.normalized(key.split);
        let partition = &self.plan.partitions[key.split];
        let (x_all, y_all) = project(data, key.set);
        let slope_columns = key.set.assignment_level_columns();

        let x = x_all.select_rows(&partition.train);
        let y: Vec<f64> = partition.train.iter().map(|&i| y_all[i]).collect();
        let groups = data.groups.select_rows(&partition.train);
        let train = TrainingData {
            x: &x,
            y: &y,
            groups: &groups,
            slope_columns: &slope_columns,
            y_max: NORMALIZED_Y_MAX,
        };
        let grid = &self.grids[&key.algorithm];
        let cv = cross_validate(grid, &train, self.config.folds, cell_seed)?;
        let best = &cv.scores[cv.best];
        let summary = CvSummary {
            best_config: best.config.clone(),
            mean_g: cv.best_mean_g(),
            sd_g: best.sd_g.unwrap_or(0.0),
            n_configs: cv.scores.len(),
            n_failed: cv.scores.iter().filter(|s| s.mean_g.is_none()).count(),
        };

        let mut model = fit(&best.config, &train, derive_seed_str(cell_seed, "final"))?;
        model.feature_names = key.set.feature_names().iter().map(|s| s.to_string()).collect();
        let x_test = x_all.select_rows(&partition.test);
        let y_test: Vec<f64> = partition.test.iter().map(|&i| y_all[i]).collect();
        let predictions = model.predict(&x_test, Some(&data.groups.select_rows(&partition.test)))?;
        let test = evaluate(&predictions, &y_test, NORMALIZED_Y_MAX)?;
        let importance = match key.algorithm.family() {
            Family::Rf | Family::Gbm => Some(model.feature_importance()?),
            _ => None,
        };
        Ok((
            CellResult {
                algorithm: key.algorithm,
                predictor_set: key.set,
                split: key.split,
                seed: cell_seed,
                cv: summary,
                test,
                importance,
            },
            model,
        ))
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_cell(path: &Path) -> Option<CellRecord> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// All cells in canonical order: split, then predictor set, then algorithm,
/// each in configuration order.
pub fn cell_keys(config: &RunConfig) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for split in 0..config.n_splits {
        for &set in &config.predictor_sets {
            for &algorithm in &config.algorithms {
                keys.push(CellKey { split, set, algorithm });
            }
        }
    }
    keys
}

/// Runs (or resumes) the full experiment and emits the report when every
/// cell succeeded.
pub fn cmd_run(config: &RunConfig, options: &RunOptions<'_>) -> Result<RunOutcome, ExperimentError> {
    config.validate()?;
    let seed = config.master_seed()?;
    let out = &config.output_dir;
    let cells_dir = out.join("cells");
    let models_dir = out.join("models");
    fs::create_dir_all(&cells_dir).map_err(io_err(&cells_dir))?;
    if config.save_models {
        fs::create_dir_all(&models_dir).map_err(io_err(&models_dir))?;
    }

    let loaded = load_data(config, seed)?;
    let n = loaded.dataset.len();
    let plan = make_split_plan_with(n, config.n_splits, derive_seed_str(seed, "splits"))?;
    let normalized = match config.normalization {
        Normalization::AllRows => vec![apply_normalizer(&loaded.dataset, &fit_normalizer(&loaded.dataset, Scope::AllRows))],
        Normalization::TrainOnly => plan
            .partitions
            .iter()
            .map(|p| apply_normalizer(&loaded.dataset, &fit_normalizer(&loaded.dataset, Scope::TrainOnly(&p.train))))
            .collect(),
    };
    let grids: BTreeMap<Algorithm, HyperGrid> = config.algorithms.iter().copied().zip(config.grids()?).collect();
    let ctx = RunContext {
        config,
        seed,
        plan,
        normalized,
        grids,
        data_fingerprint: loaded.fingerprint,
    };

    let keys = cell_keys(config);
    let total = keys.len();
    let finished = AtomicUsize::new(0);
    let resumed = AtomicUsize::new(0);
    let records: Vec<CellRecord> = keys
        .par_iter()
        .map(|key| -> Result<CellRecord, ExperimentError> {
            let fingerprint = ctx.fingerprint(key)?;
            let path = cells_dir.join(format!("{}.json", key.file_stem()));
            let report = |record: &CellRecord, status: CellStatus| {
                if let Some(progress) = options.progress {
                    progress(&ProgressEvent {
                        finished: finished.fetch_add(1, Ordering::SeqCst) + 1,
                        total,
                        cell: key.label(),
                        seconds: record.seconds,
                        status,
                    });
                }
            };
            if let Some(record) = read_cell(&path) {
                let model_ok = !config.save_models || models_dir.join(format!("{}.json", key.file_stem())).exists();
                if record.fingerprint == fingerprint && matches!(record.outcome, CellOutcome::Ok { .. }) && model_ok {
                    resumed.fetch_add(1, Ordering::SeqCst);
                    report(&record, CellStatus::Resumed);
                    return Ok(record);
                }
            }
            let start = Instant::now();
            let (outcome, status) = match ctx.run_cell(key) {
                Ok((result, mut model)) => {
                    if config.save_models {
                        model.meta.warnings.sort();
                        let model_path = models_dir.join(format!("{}.json", key.file_stem()));
                        write_atomic(&model_path, model.to_json()?.as_bytes())?;
                    }
                    let g = result.test.g;
                    (CellOutcome::Ok { result }, CellStatus::Done { test_g: g })
                }
                Err(e) => (CellOutcome::Failed { error: e.to_string() }, CellStatus::Failed(e.to_string())),
            };
            let record = CellRecord {
                key: key.label(),
                fingerprint,
                seconds: start.elapsed().as_secs_f64(),
                outcome,
            };
            write_atomic(&path, serde_json::to_string_pretty(&record)?.as_bytes())?;
            report(&record, status);
            Ok(record)
        })
        .collect::<Result<_, _>>()?;

    let mut timings = String::from("cell,seconds\n");
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for record in &records {
        timings.push_str(&format!("{},{:.3}\n", record.key, record.seconds));
        match &record.outcome {
            CellOutcome::Ok { result } => entries.push(result.clone()),
            CellOutcome::Failed { error } => failures.push(CellFailure {
                cell: record.key.clone(),
                error: error.clone(),
            }),
        }
    }
    let timings_path = out.join("timings.csv");
    fs::write(&timings_path, timings).map_err(io_err(&timings_path))?;

    let meta = RunMeta {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: seed,
        config_hash: config_hash(&ctx)?,
        data_source: loaded.source,
        n_rows: n,
        n_dropped: loaded.n_dropped,
        timely_fraction: loaded.dataset.timely_fraction(),
        normalization: config.normalization.label().into(),
        train_size: ctx.plan.partitions[0].train.len(),
        test_size: ctx.plan.partitions[0].test.len(),
        folds: config.folds,
        mean_test_overlap: overlap_stats(&ctx.plan)?.mean,
        grid_sizes: ctx.grids.iter().map(|(a, g)| (a.label().to_string(), g.len())).collect(),
    };
    let manifest = RunManifest {
        meta: meta.clone(),
        algorithms: config.algorithms.clone(),
        predictor_sets: config.predictor_sets.clone(),
        n_splits: config.n_splits,
        cells: keys.iter().map(CellKey::file_stem).collect(),
        failures: failures.clone(),
    };
    let manifest_path = out.join("run.json");
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;

    let report = ExperimentReport {
        meta,
        algorithms: config.algorithms.clone(),
        predictor_sets: config.predictor_sets.clone(),
        n_splits: config.n_splits,
        entries,
    };
    let emitted = if failures.is_empty() {
        emit_tables(&report, &out.join("report"), &options.formats)?
    } else {
        Vec::new()
    };
    Ok(RunOutcome {
        report,
        failures,
        resumed: resumed.into_inner(),
        emitted,
    })
}

fn config_hash(ctx: &RunContext<'_>) -> Result<String, ExperimentError> {
    let grids: Vec<(String, Vec<String>)> = ctx
        .config
        .algorithms
        .iter()
        .map(|a| (a.label().to_string(), ctx.grids[a].configs().iter().map(|c| c.describe()).collect()))
        .collect();
    let input = serde_json::json!({
        "data": format!("{:016x}", ctx.data_fingerprint),
        "seed": ctx.seed,
        "algorithms": ctx.config.algorithms,
        "predictor_sets": ctx.config.predictor_sets,
        "normalization": ctx.config.normalization,
        "folds": ctx.config.folds,
        "n_splits": ctx.config.n_splits,
        "grids": grids,
    });
    Ok(format!("{:016x}", fnv1a(serde_json::to_string(&input)?.as_bytes())))
}

/// Rebuilds the report of a previous run from `<out>/run.json` and the
/// persisted cells.
pub fn load_report(out: &Path) -> Result<ExperimentReport, ExperimentError> {
    let manifest_path = out.join("run.json");
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let mut entries = Vec::new();
    for stem in &manifest.cells {
        if let Some(CellRecord {
            outcome: CellOutcome::Ok { result },
            ..
        }) = read_cell(&out.join("cells").join(format!("{stem}.json")))
        {
            entries.push(result);
        }
    }
    Ok(ExperimentReport {
        meta: manifest.meta,
        algorithms: manifest.algorithms,
        predictor_sets: manifest.predictor_sets,
        n_splits: manifest.n_splits,
        entries,
    })
}

/// Re-emits the tables of a previous run into `<out>/report`.
pub fn cmd_report(out: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, ExperimentError> {
    let report = load_report(out)?;
    Ok(emit_tables(&report, &out.join("report"), formats)?)
}

/// Features of a saved RF or GBM model ranked by normalized importance
/// (descending; ties keep column order).
pub fn cmd_importance(model_path: &Path) -> Result<Vec<(String, f64)>, ExperimentError> {
    let model = TrainedModel::load(model_path)?;
    importance_ranking(&model)
}

pub fn importance_ranking(model: &TrainedModel) -> Result<Vec<(String, f64)>, ExperimentError> {
    let importance = model.feature_importance()?;
    let mut ranked: Vec<(String, f64)> = importance
        .into_iter()
        .enumerate()
        .map(|(j, v)| {
            let name = model.feature_names.get(j).cloned().unwrap_or_else(|| format!("x{j}"));
            (name, v)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}

/// Ranking as a printable table.
pub fn importance_table(model_label: &str, ranked: &[(String, f64)]) -> Table {
    Table {
        name: "importance".into(),
        title: format!("Normalized feature importance ({model_label})"),
        headers: vec!["Rank".into(), "Feature".into(), "Importance [%]".into()],
        rows: ranked
            .iter()
            .enumerate()
            .map(|(i, (name, v))| {
                vec![
                    TableCell {
                        text: (i + 1).to_string(),
                        best: false,
                    },
                    TableCell {
                        text: name.clone(),
                        best: false,
                    },
                    TableCell {
                        text: format!("{:.2}", 100.0 * v),
                        best: i == 0,
                    },
                ]
            })
            .collect(),
    }
}
