use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use delaybench::experiment::{self, CellStatus, ProgressEvent, RunConfig, RunOptions};
use delaybench::models::TrainedModel;
use delaybench::report::Format;

/// Benchmark regression models for predicting assignment submission delay.
#[derive(Parser)]
#[command(name = "delaybench", version)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
}

impl FormatArg {
    fn formats(arg: Option<FormatArg>) -> Vec<Format> {
        match arg {
            Some(FormatArg::Csv) => vec![Format::Csv],
            Some(FormatArg::Md) => vec![Format::Markdown],
            None => vec![Format::Csv, Format::Markdown],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV file.
        #[arg(long, default_value = "synthetic.csv")]
        out: PathBuf,
    },
    /// Run (or resume) the full experiment and emit the report tables.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit only one table format (default: both).
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Suppress per-cell progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Rank the features of a saved RF or GBM model by importance.
    Importance {
        /// Saved model (`<out>/models/*.json`).
        model: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: FormatArg,
    },
    /// Re-emit the report tables from a previous run's persisted cells.
    Report {
        /// Output directory of the run.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if seed.is_some() {
        config.seed = seed;
    }
    Ok(config)
}

fn print_progress(event: &ProgressEvent) {
    let status = match &event.status {
        CellStatus::Done { test_g } => format!("test G {test_g:.4}"),
        CellStatus::Resumed => "resumed".to_string(),
        CellStatus::Failed(e) => format!("FAILED: {e}"),
    };
    eprintln!(
        "[{}/{}] {:<22} {:>8.2}s  {status}",
        event.finished, event.total, event.cell, event.seconds
    );
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Synth { config, seed, out } => {
            let config = load_config(config.as_deref(), seed)?;
            let dataset = experiment::cmd_synth(&config, &out)?;
            eprintln!(
                "wrote {} rows to {} ({:.1}% timely)",
                dataset.len(),
                out.display(),
                100.0 * dataset.timely_fraction()
            );
        }
        Command::Run {
            config,
            seed,
            out,
            format,
            quiet,
        } => {
            let mut config = load_config(config.as_deref(), seed)?;
            if let Some(out) = out {
                config.output_dir = out;
            }
            let options = RunOptions {
                formats: FormatArg::formats(format),
                progress: if quiet { None } else { Some(&print_progress) },
            };
            let outcome = experiment::cmd_run(&config, &options)?;
            if !outcome.failures.is_empty() {
                eprintln!("{} cell(s) failed; report not emitted:", outcome.failures.len());
                for f in &outcome.failures {
                    eprintln!("  {}: {}", f.cell, f.error);
                }
                return Ok(ExitCode::FAILURE);
            }
            eprintln!(
                "{} cells ({} resumed); report written to {}",
                outcome.report.entries.len(),
                outcome.resumed,
                config.output_dir.join("report").display()
            );
        }
        Command::Importance { model, format } => {
            let trained = TrainedModel::load(&model).with_context(|| format!("loading {}", model.display()))?;
            let ranked = experiment::importance_ranking(&trained)?;
            let table = experiment::importance_table(trained.config.algorithm.label(), &ranked);
            print!("{}", table.render(FormatArg::formats(Some(format))[0]));
        }
        Command::Report { out, format } => {
            let written = experiment::cmd_report(&out, &FormatArg::formats(format))?;
            for path in written {
                println!("{}", path.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
