//! Run-log CSV schemas and the per-iteration summary.
//!
//! Both files are plain comma-separated text with fixed headers and no
//! quoting (every field is a number or a bare strategy name). Floats are
//! printed with Rust's shortest round-trip formatting, so writing is
//! deterministic and parsing recovers the exact bits.

use almgp::active::{RunRecord, Strategy};
use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const RUNS_HEADER: &str = "run_id,strategy,iteration,n_train,test_rmse,wall_ms";
pub const AGG_HEADER: &str = "strategy,iteration,mean_rmse,min_rmse,max_rmse";

/// One summary row: RMSE statistics over the repetitions of a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub strategy: Strategy,
    pub iteration: usize,
    pub mean_rmse: f64,
    pub min_rmse: f64,
    pub max_rmse: f64,
}

pub fn runs_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RUNS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.run_id, r.strategy, r.iteration, r.n_train, r.test_rmse, r.wall_ms
        )
        .expect("writing to string");
    }
    out
}

/// Reads a runs file back. Selected-point coordinates live in a separate
/// file, so `chosen` comes back empty.
pub fn parse_runs_csv(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RUNS_HEADER => {}
        other => bail!("bad runs header: {other:?}"),
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            bail!("runs row {}: expected 6 fields, got {}", idx + 2, fields.len());
        }
        let ctx = || format!("runs row {}", idx + 2);
        records.push(RunRecord {
            run_id: fields[0].parse().with_context(ctx)?,
            strategy: fields[1].parse()?,
            iteration: fields[2].parse().with_context(ctx)?,
            n_train: fields[3].parse().with_context(ctx)?,
            chosen: Vec::new(),
            test_rmse: fields[4].parse().with_context(ctx)?,
            wall_ms: fields[5].parse().with_context(ctx)?,
        });
    }
    Ok(records)
}

/// Groups by (strategy, iteration) and reports mean/min/max test RMSE.
/// A run that stopped before the longest run of its strategy keeps
/// contributing its final RMSE to the remaining iterations, so all
/// curves span the same x-range.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggRow> {
    // key by strategy name for a stable, deterministic row order
    let mut series: BTreeMap<(String, usize), BTreeMap<usize, f64>> = BTreeMap::new();
    for r in records {
        series
            .entry((r.strategy.to_string(), r.run_id))
            .or_default()
            .insert(r.iteration, r.test_rmse);
    }
    let mut span: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ((name, _), s) in &series {
        let first = *s.keys().next().expect("non-empty series");
        let last = *s.keys().next_back().expect("non-empty series");
        let e = span.entry(name.clone()).or_insert((first, last));
        e.0 = e.0.min(first);
        e.1 = e.1.max(last);
    }

    let mut values: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for ((name, _), s) in &series {
        let (first, last) = span[name];
        for it in first..=last {
            // the most recent value at or before `it`: a run that stopped
            // early keeps contributing its final RMSE to later rows
            let Some((_, &v)) = s.range(..=it).next_back() else {
                continue;
            };
            values.entry((name.clone(), it)).or_default().push(v);
        }
    }

    values
        .into_iter()
        .map(|((name, iteration), vs)| {
            let mean = vs.iter().sum::<f64>() / vs.len() as f64;
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in &vs {
                min = min.min(*v);
                max = max.max(*v);
            }
            AggRow {
                strategy: name.parse().expect("round-trips through Display"),
                iteration,
                mean_rmse: mean,
                min_rmse: min,
                max_rmse: max,
            }
        })
        .collect()
}

pub fn agg_to_csv(rows: &[AggRow]) -> String {
    let mut out = String::from(AGG_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.strategy, r.iteration, r.mean_rmse, r.min_rmse, r.max_rmse
        )
        .expect("writing to string");
    }
    out
}

pub fn parse_agg_csv(text: &str) -> Result<Vec<AggRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == AGG_HEADER => {}
        other => bail!("bad aggregate header: {other:?}"),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            bail!(
                "aggregate row {}: expected 5 fields, got {}",
                idx + 2,
                fields.len()
            );
        }
        let ctx = || format!("aggregate row {}", idx + 2);
        rows.push(AggRow {
            strategy: fields[0].parse()?,
            iteration: fields[1].parse().with_context(ctx)?,
            mean_rmse: fields[2].parse().with_context(ctx)?,
            min_rmse: fields[3].parse().with_context(ctx)?,
            max_rmse: fields[4].parse().with_context(ctx)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(run_id: usize, strategy: Strategy, iteration: usize, rmse: f64) -> RunRecord {
        RunRecord {
            run_id,
            strategy,
            iteration,
            n_train: 10 + iteration,
            chosen: Vec::new(),
            test_rmse: rmse,
            wall_ms: 3,
        }
    }

    #[test]
    fn single_run_mean_equals_min_equals_max() {
        let recs = vec![
            rec(0, Strategy::Alc, 1, 2.0),
            rec(0, Strategy::Alc, 2, 1.5),
        ];
        for row in aggregate(&recs) {
            assert_eq!(row.mean_rmse, row.min_rmse);
            assert_eq!(row.mean_rmse, row.max_rmse);
        }
    }

    #[test]
    fn two_runs_mean_min_max() {
        let recs = vec![
            rec(0, Strategy::Alc, 1, 1.0),
            rec(1, Strategy::Alc, 1, 3.0),
        ];
        let rows = aggregate(&recs);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_rmse, 2.0);
        assert_eq!(rows[0].min_rmse, 1.0);
        assert_eq!(rows[0].max_rmse, 3.0);
    }

    /// An early-stopped run keeps its last RMSE for the rest of the
    /// horizon; fixture worked out by hand.
    #[test]
    fn early_stop_carries_final_value_forward() {
        let mut recs = Vec::new();
        for (i, rmse) in [4.0, 3.0, 2.0, 1.0].iter().enumerate() {
            recs.push(rec(0, Strategy::Random, i + 1, *rmse));
        }
        recs.push(rec(1, Strategy::Random, 1, 6.0));
        recs.push(rec(1, Strategy::Random, 2, 5.0));

        let rows = aggregate(&recs);
        assert_eq!(rows.len(), 4);
        let at = |it: usize| rows.iter().find(|r| r.iteration == it).unwrap();
        assert_eq!(at(2).mean_rmse, 4.0); // (3 + 5) / 2
        assert_eq!(at(3).mean_rmse, 3.5); // (2 + 5) / 2, run 1 carried
        assert_eq!(at(4).mean_rmse, 3.0); // (1 + 5) / 2
        assert_eq!(at(4).min_rmse, 1.0);
        assert_eq!(at(4).max_rmse, 5.0);
    }

    #[test]
    fn rows_come_out_sorted_by_strategy_then_iteration() {
        let recs = vec![
            rec(2, Strategy::Random, 1, 1.0),
            rec(2, Strategy::Random, 2, 1.0),
            rec(0, Strategy::Alc, 1, 1.0),
            rec(0, Strategy::Alc, 2, 1.0),
        ];
        let rows = aggregate(&recs);
        let keys: Vec<(String, usize)> = rows
            .iter()
            .map(|r| (r.strategy.to_string(), r.iteration))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let recs = vec![
            rec(0, Strategy::Alc, 1, 0.1234567890123),
            rec(0, Strategy::Alc, 2, 1e-9),
            rec(1, Strategy::Random, 1, std::f64::consts::PI / 3.0),
        ];
        let text = runs_to_csv(&recs);
        let back = parse_runs_csv(&text).unwrap();
        assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.test_rmse.to_bits(), b.test_rmse.to_bits());
            assert_eq!(a.run_id, b.run_id);
            assert_eq!(a.strategy, b.strategy);
        }

        let rows = aggregate(&recs);
        let text = agg_to_csv(&rows);
        assert_eq!(parse_agg_csv(&text).unwrap(), rows);
    }

    #[test]
    fn parsers_reject_malformed_input() {
        assert!(parse_runs_csv("nope\n1,alc,0,10,0.5,3").is_err());
        assert!(parse_runs_csv(&format!("{RUNS_HEADER}\n1,alc,0,10,0.5")).is_err());
        assert!(parse_agg_csv(&format!("{AGG_HEADER}\nalc,0,a,b,c")).is_err());
    }
}
