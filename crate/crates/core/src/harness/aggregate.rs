use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunResult, StepRecord};
use crate::error::{Error, Result};

const CURVE_HEADER: [&str; 6] = ["strategy", "t", "mean_cum_reward", "sd", "min", "max"];

/// Cumulative-reward statistics across replications at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strategy: String,
    pub t: usize,
    pub mean_cum_reward: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveTable {
    pub points: Vec<CurvePoint>,
}

impl CurveTable {
    pub fn extend(&mut self, other: CurveTable) {
        self.points.extend(other.points);
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Strategy names in first-appearance order.
    pub fn strategies(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for p in &self.points {
            if !seen.contains(&p.strategy.as_str()) {
                seen.push(&p.strategy);
            }
        }
        seen
    }
}

/// Per-step mean, sample standard deviation (0 for one curve), min and max.
pub fn aggregate_curves(strategy: &str, curves: &[Vec<f64>]) -> Result<CurveTable> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidConfig("aggregation needs at least one run".into()))?;
    if let Some(bad) = curves.iter().find(|c| c.len() != first.len()) {
        return Err(Error::MismatchedHorizons(first.len(), bad.len()));
    }
    let n = curves.len() as f64;
    let points = (0..first.len())
        .map(|i| {
            let values = curves.iter().map(|c| c[i]);
            let mean = values.clone().sum::<f64>() / n;
            let sd = if curves.len() > 1 {
                (values.clone().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            CurvePoint {
                strategy: strategy.to_string(),
                t: i + 1,
                mean_cum_reward: mean,
                sd,
                min: values.clone().fold(f64::INFINITY, f64::min),
                max: values.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Ok(CurveTable { points })
}

/// Aggregate replications of one strategy.
pub fn aggregate_replications(strategy: &str, runs: &[RunResult]) -> Result<CurveTable> {
    let curves: Vec<Vec<f64>> = runs.iter().map(RunResult::cum_rewards).collect();
    aggregate_curves(strategy, &curves)
}

pub fn export_curves(table: &CurveTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if table.is_empty() {
        return Err(Error::InvalidConfig("curve table is empty".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(CURVE_HEADER).map_err(|e| Error::Csv(e.to_string()))?;
    for p in &table.points {
        w.serialize((&p.strategy, p.t, p.mean_cum_reward, p.sd, p.min, p.max))
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curves(path: impl AsRef<Path>) -> Result<CurveTable> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(|e| Error::Csv(e.to_string()))?;
    if header.iter().ne(CURVE_HEADER) {
        return Err(Error::Schema {
            line: 1,
            reason: format!("expected header `{}`", CURVE_HEADER.join(",")),
        });
    }
    let points = r
        .deserialize()
        .collect::<std::result::Result<Vec<CurvePoint>, _>>()
        .map_err(|e| Error::Csv(e.to_string()))?;
    Ok(CurveTable { points })
}

/// Final-step statistics of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalSummary {
    pub strategy: String,
    pub horizon: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// The last point of each strategy's curve, in table order.
pub fn final_summary(table: &CurveTable) -> Vec<FinalSummary> {
    table
        .strategies()
        .into_iter()
        .filter_map(|s| {
            let last = table.points.iter().filter(|p| p.strategy == s).max_by_key(|p| p.t)?;
            Some(FinalSummary {
                strategy: s.to_string(),
                horizon: last.t,
                mean: last.mean_cum_reward,
                sd: last.sd,
                min: last.min,
                max: last.max,
            })
        })
        .collect()
}

/// The JSON-lines form of a step log.
pub fn log_lines(records: &[StepRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("step records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_log(records: &[StepRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(log_lines(records).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<StepRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: i as u64 + 1,
            reason: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}
