//! Experiment orchestration: runs the (strategy x repetition) grid and
//! writes the artifact bundle.

use crate::aggregate::{agg_to_csv, aggregate, runs_to_csv};
use crate::config::Experiment;
use crate::plot;
use almgp::active::{run_loop, LoopInputs, RunRecord, Strategy};
use almgp::mgp::{save_checkpoint, FittedMgp};
use almgp::problems::{make_init, make_oracle, make_problem_data};
use anyhow::{Context, Result};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const RUNS_FILE: &str = "runs.csv";
pub const POINTS_FILE: &str = "selected_points.csv";
pub const AGG_FILE: &str = "aggregate.csv";
pub const PLOT_FILE: &str = "plot.svg";

/// Digest of one strategy's repetitions, for the console.
#[derive(Debug)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub runs: usize,
    pub mean_final_rmse: f64,
}

struct Job {
    run_id: usize,
    strategy: Strategy,
    seed: u64,
}

struct FinishedRun {
    run_id: usize,
    records: Vec<RunRecord>,
    model: FittedMgp,
    final_rmse: f64,
}

/// Executes every run and writes runs.csv, selected_points.csv,
/// aggregate.csv, plot.svg, and one model checkpoint per run.
///
/// The output directory is probed for writability up front, so a bad path
/// fails in milliseconds instead of after the fits. Repetitions execute in
/// parallel; all file output happens afterwards on this thread, in run_id
/// order.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<StrategySummary>> {
    probe_writable(&exp.output_dir)?;

    let mut jobs = Vec::new();
    for (si, &strategy) in exp.strategies.iter().enumerate() {
        for rep in 0..exp.repetitions {
            jobs.push(Job {
                run_id: si * exp.repetitions + rep,
                strategy,
                seed: exp.base_seed + rep as u64,
            });
        }
    }

    let finished: Vec<Result<FinishedRun>> =
        jobs.par_iter().map(|job| one_run(exp, job)).collect();
    let mut runs = Vec::with_capacity(finished.len());
    for r in finished {
        runs.push(r?);
    }

    let points = points_csv(exp.problem.input_dim, &runs);
    let mut records = Vec::new();
    for run in &runs {
        let path = exp.output_dir.join(format!("model_run{}.json", run.run_id));
        save_checkpoint(&run.model, &path)
            .with_context(|| format!("writing checkpoint for run {}", run.run_id))?;
        records.extend_from_slice(&run.records);
    }
    let rows = aggregate(&records);

    write_artifact(&exp.output_dir, RUNS_FILE, &runs_to_csv(&records))?;
    write_artifact(&exp.output_dir, POINTS_FILE, &points)?;
    write_artifact(&exp.output_dir, AGG_FILE, &agg_to_csv(&rows))?;
    let title = exp.problem.name.to_string();
    write_artifact(&exp.output_dir, PLOT_FILE, &plot::render(&rows, &title))?;

    Ok(summaries(exp, &runs))
}

fn one_run(exp: &Experiment, job: &Job) -> Result<FinishedRun> {
    let p = &exp.problem;
    let data = make_problem_data(p, job.seed)?;
    let init = make_init(p, job.seed);
    let inputs = LoopInputs {
        arch: &p.arch,
        init,
        train: data.train,
        pool: data.pool,
        test: &data.test,
        strategy: job.strategy,
        al: &p.al,
        opt: &p.opt,
        rmse_stop_in_optimizer: p.rmse_stop_in_optimizer,
        run_id: job.run_id,
        seed: job.seed,
    };
    let oracle = make_oracle(p, job.seed);
    let out = run_loop(inputs, oracle).map_err(|abort| {
        anyhow::Error::new(abort.error).context(format!(
            "run {} ({}, seed {})",
            job.run_id, job.strategy, job.seed
        ))
    })?;
    let final_rmse = out.records.last().map_or(out.initial_rmse, |r| r.test_rmse);
    Ok(FinishedRun {
        run_id: job.run_id,
        records: out.records,
        model: out.model,
        final_rmse,
    })
}

/// Creates the directory and proves a file can actually land in it.
fn probe_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output dir {}", dir.display()))?;
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"ok")
        .with_context(|| format!("output dir {} is not writable", dir.display()))?;
    let _ = fs::remove_file(&probe);
    Ok(())
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Coordinates of the labelled points, one row per point. Kept separate
/// from the run log because the number of columns depends on the problem.
fn points_csv(input_dim: usize, runs: &[FinishedRun]) -> String {
    let mut out = String::from("run_id,strategy,iteration");
    for d in 1..=input_dim {
        write!(out, ",x{d}").expect("writing to string");
    }
    out.push('\n');
    for run in runs {
        for rec in &run.records {
            for point in &rec.chosen {
                write!(out, "{},{},{}", rec.run_id, rec.strategy, rec.iteration)
                    .expect("writing to string");
                for v in point {
                    write!(out, ",{v}").expect("writing to string");
                }
                out.push('\n');
            }
        }
    }
    out
}

fn summaries(exp: &Experiment, runs: &[FinishedRun]) -> Vec<StrategySummary> {
    exp.strategies
        .iter()
        .enumerate()
        .map(|(si, &strategy)| {
            let chunk = &runs[si * exp.repetitions..(si + 1) * exp.repetitions];
            let mean =
                chunk.iter().map(|r| r.final_rmse).sum::<f64>() / chunk.len() as f64;
            StrategySummary {
                strategy,
                runs: chunk.len(),
                mean_final_rmse: mean,
            }
        })
        .collect()
}
