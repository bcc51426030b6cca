//! Command-line front end for the active-learning experiments.
//!
//! On failure the process exits nonzero after printing a single JSON
//! object to stderr, so callers can parse errors without scraping text.

mod aggregate;
mod config;
mod plot;
mod runner;

use crate::config::{CliOverrides, Experiment};
use almgp::active::Strategy;
use almgp::problems::{true_value, ProblemName};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "almgp", version, about = "Active learning for manifold GP regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Override the number of repetitions.
        #[arg(long)]
        repetitions: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        base_seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Run only this strategy (repeat the flag for several).
        #[arg(long = "strategy")]
        strategies: Vec<Strategy>,
    },
    /// Recompute aggregate.csv from an existing runs.csv.
    Aggregate { dir: PathBuf },
    /// Re-emit plot.svg from an existing aggregate.csv.
    Plot { dir: PathBuf },
    /// Evaluate a benchmark function at one point (debugging aid).
    Oracle {
        problem: ProblemName,
        #[arg(required = true, num_args = 1.., allow_negative_numbers = true)]
        point: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.exit_code() == 0 => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&anyhow::anyhow!(e.to_string())),
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(&err),
    }
}

fn fail(err: &anyhow::Error) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": format!("{err:#}") }));
    ExitCode::FAILURE
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            repetitions,
            base_seed,
            output_dir,
            strategies,
        } => {
            let overrides = CliOverrides {
                repetitions,
                base_seed,
                output_dir,
                strategies,
            };
            let exp = Experiment::load(&config, &overrides)?;
            let summaries = runner::run_experiment(&exp)?;
            for s in &summaries {
                println!(
                    "{}: mean final RMSE {:.6} over {} runs",
                    s.strategy, s.mean_final_rmse, s.runs
                );
            }
            println!("artifacts written to {}", exp.output_dir.display());
            Ok(())
        }
        Command::Aggregate { dir } => {
            let records = aggregate::parse_runs_csv(&read(&dir.join(runner::RUNS_FILE))?)?;
            if records.is_empty() {
                bail!("{} holds no run records", dir.display());
            }
            let rows = aggregate::aggregate(&records);
            let path = dir.join(runner::AGG_FILE);
            fs::write(&path, aggregate::agg_to_csv(&rows))
                .with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Plot { dir } => {
            let rows = aggregate::parse_agg_csv(&read(&dir.join(runner::AGG_FILE))?)?;
            // The bundle directory is named after the problem by default,
            // so its name doubles as the plot title.
            let title = dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "experiment".to_owned());
            let path = dir.join(runner::PLOT_FILE);
            fs::write(&path, plot::render(&rows, &title))
                .with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Oracle { problem, point } => {
            println!("{}", true_value(problem, &point)?);
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
