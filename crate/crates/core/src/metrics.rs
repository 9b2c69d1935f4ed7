//! Mapping-quality metrics: the swarm's aggregated map and its error,
//! coverage, and how observation effort correlates with weed density.

use crate::belief::BeliefMap;
use crate::world::FieldTruth;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Header of every per-run and aggregated metrics CSV.
pub const CSV_HEADER: &str =
    "run_id,strategy,N,R,seed,time_s,time_over_tn,mse,coverage_fraction,pearson_r";

/// Swarm-level estimate for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateCell {
    pub estimate: usize,
    pub entropy: f64,
    /// Agent whose knowledge vector was selected.
    pub source: usize,
}

/// Per cell, take the knowledge vector with the lowest entropy across
/// agents (lowest agent id on ties) and read off its most likely count.
pub fn aggregate_map<'a, I>(maps: I) -> Vec<AggregateCell>
where
    I: IntoIterator<Item = &'a BeliefMap>,
{
    let mut out: Vec<AggregateCell> = Vec::new();
    for (agent, map) in maps.into_iter().enumerate() {
        if agent == 0 {
            out = map
                .cells()
                .iter()
                .map(|kv| AggregateCell {
                    estimate: kv.estimate(),
                    entropy: kv.entropy(),
                    source: 0,
                })
                .collect();
            continue;
        }
        assert_eq!(map.cells().len(), out.len(), "belief maps differ in size");
        for (slot, kv) in out.iter_mut().zip(map.cells()) {
            if kv.entropy() < slot.entropy {
                *slot = AggregateCell {
                    estimate: kv.estimate(),
                    entropy: kv.entropy(),
                    source: agent,
                };
            }
        }
    }
    assert!(!out.is_empty(), "aggregate of zero maps");
    out
}

/// Mean squared error of per-cell estimates against the truth, over the
/// whole field.
pub fn estimates_mse<I>(estimates: I, field: &FieldTruth) -> f64
where
    I: IntoIterator<Item = usize>,
{
    let grid = field.grid();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (est, &truth) in estimates.into_iter().zip(grid) {
        let e = est as f64 - truth as f64;
        sum += e * e;
        n += 1;
    }
    assert_eq!(n, grid.len(), "estimate grid does not match the field");
    sum / n as f64
}

pub fn map_mse(aggregate: &[AggregateCell], field: &FieldTruth) -> f64 {
    estimates_mse(aggregate.iter().map(|a| a.estimate), field)
}

/// Latest first visit once every cell has one; `None` while any cell is
/// still unvisited.
pub fn coverage_time(first_visits: &[Option<f64>]) -> Option<f64> {
    first_visits
        .iter()
        .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|t| acc.max(t)))
}

pub fn coverage_fraction(first_visits: &[Option<f64>]) -> f64 {
    first_visits.iter().filter(|v| v.is_some()).count() as f64 / first_visits.len() as f64
}

/// Pearson correlation; `None` when either variable is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.is_empty() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between true weed counts and the number of distinct
/// observations the swarm made of each cell.
pub fn weed_observation_correlation(field: &FieldTruth, counts: &[u32]) -> Option<f64> {
    let weeds: Vec<f64> = field.grid().iter().map(|&w| w as f64).collect();
    let counts: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    pearson(&weeds, &counts)
}

/// One metrics sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub time_s: f64,
    pub time_over_tn: f64,
    pub mse: f64,
    pub coverage_fraction: f64,
    pub coverage_time_s: Option<f64>,
    pub pearson_r: Option<f64>,
}

/// Identifies a run in CSV rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLabel {
    pub run_id: String,
    pub strategy: String,
    pub n_agents: usize,
    pub range: String,
    pub seed: u64,
}

pub fn write_csv_header<W: Write>(mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")
}

pub fn write_csv_rows<W: Write>(mut out: W, label: &RunLabel, records: &[MetricsRecord]) -> io::Result<()> {
    for r in records {
        let pearson = r.pearson_r.map(|p| p.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            label.run_id,
            label.strategy,
            label.n_agents,
            label.range,
            label.seed,
            r.time_s,
            r.time_over_tn,
            r.mse,
            r.coverage_fraction,
            pearson
        )?;
    }
    Ok(())
}

/// Per-run summary written next to the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub strategy: String,
    pub n_agents: usize,
    pub range: String,
    pub seed: u64,
    pub t_n_s: f64,
    pub duration_s: f64,
    pub final_mse: f64,
    pub coverage_time_s: Option<f64>,
    pub coverage_over_tn: Option<f64>,
    pub observations: u64,
    pub transmissions: u64,
}
