//! Runs single simulations and whole experiment matrices.

use crate::comms::CommRange;
use crate::config::{Duration, ExperimentConfig};
use crate::engine::{stream_rng, streams, SimConfig, Simulation};
use crate::metrics::{self, MetricsRecord, RunLabel, RunSummary};
use crate::sensor::SensorModel;
use crate::strategy::preplanned::preplanned_baseline_mse;
use crate::strategy::StrategyConfig;
use crate::world::{generate_field, FieldTruth, WorldConfig, WorldError};
use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Metrics are sampled this many times per `T_N`.
pub const SAMPLES_PER_TN: u32 = 20;

/// One cell of the run matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub strategy: StrategyConfig,
    pub n_agents: usize,
    pub range: CommRange,
    pub seed: u64,
}

impl RunSpec {
    /// For example `G_N50_Rinf_s7`.
    pub fn run_id(&self) -> String {
        format!(
            "{}_N{}_R{}_s{}",
            self.strategy.label(),
            self.n_agents,
            self.range.label(),
            self.seed
        )
    }

    pub fn label(&self) -> RunLabel {
        RunLabel {
            run_id: self.run_id(),
            strategy: self.strategy.label(),
            n_agents: self.n_agents,
            range: self.range.label(),
            seed: self.seed,
        }
    }
}

/// Optional per-run side outputs.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// File receiving one line per processed message delivery.
    pub trace: Option<PathBuf>,
    /// Directory and interval (seconds) for state snapshots.
    pub snapshots: Option<(PathBuf, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub label: RunLabel,
    pub records: Vec<MetricsRecord>,
    pub summary: RunSummary,
}

impl RunOutput {
    pub fn csv(&self) -> String {
        let mut out = Vec::new();
        metrics::write_csv_header(&mut out).expect("write to memory");
        metrics::write_csv_rows(&mut out, &self.label, &self.records).expect("write to memory");
        String::from_utf8(out).expect("CSV is UTF-8")
    }
}

/// The field used by every run with this seed.
pub fn field_for_seed(world: &WorldConfig, seed: u64) -> Result<FieldTruth, WorldError> {
    generate_field(world, &mut stream_rng(seed, streams::FIELD))
}

fn sample_time(k: u32, t_n: f64) -> f64 {
    k as f64 * t_n / SAMPLES_PER_TN as f64
}

/// Runs one cell of the matrix. Metrics are taken at the first tick at or
/// after each multiple of `T_N / 20`, and at the end.
pub fn execute(
    world: &WorldConfig,
    sensor: &SensorModel,
    spec: &RunSpec,
    duration: Duration,
    options: &RunOptions,
) -> anyhow::Result<RunOutput> {
    let field = field_for_seed(world, spec.seed)?;
    if let StrategyConfig::Preplanned { passes } = spec.strategy {
        return Ok(preplanned_run(world, sensor, &field, spec, passes, duration));
    }
    let config = SimConfig {
        world: world.clone(),
        strategy: spec.strategy,
        n_agents: spec.n_agents,
        range: spec.range,
        seed: spec.seed,
    };
    let t_n = config.t_n();
    let end = duration.max_time_over_tn() * t_n;
    let until_covered = matches!(duration, Duration::UntilCovered { .. });
    let mut sim = Simulation::new(config, field, sensor.clone())?;
    if let Some(path) = &options.trace {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        sim.set_trace(Box::new(BufWriter::new(file)));
    }
    if let Some((dir, _)) = &options.snapshots {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let mut records = vec![sim.metrics()];
    let mut next_sample = 1;
    let mut next_snapshot = 0.0;
    loop {
        if let Some((dir, every)) = &options.snapshots {
            if sim.now() >= next_snapshot {
                let path = dir.join(format!("t{:08}.txt", sim.tick()));
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                sim.write_snapshot(BufWriter::new(file))?;
                next_snapshot += every;
            }
        }
        if sim.now() >= end || (until_covered && sim.coverage_time().is_some()) {
            break;
        }
        sim.step();
        if sim.now() >= sample_time(next_sample, t_n) {
            records.push(sim.metrics());
            while sample_time(next_sample, t_n) <= sim.now() {
                next_sample += 1;
            }
        }
    }
    if records.last().map(|r| r.time_s) != Some(sim.now()) {
        records.push(sim.metrics());
    }

    let last = records.last().expect("at least one record");
    let stats = sim.stats();
    let summary = RunSummary {
        run_id: spec.run_id(),
        strategy: spec.strategy.label(),
        n_agents: spec.n_agents,
        range: spec.range.label(),
        seed: spec.seed,
        t_n_s: t_n,
        duration_s: sim.now(),
        final_mse: last.mse,
        coverage_time_s: sim.coverage_time(),
        coverage_over_tn: sim.coverage_time().map(|t| t / t_n),
        observations: stats.observations,
        transmissions: stats.transmissions,
    };
    Ok(RunOutput {
        label: spec.label(),
        records,
        summary,
    })
}

/// The baseline as a step function on the same sampling grid: the error
/// after the last completed pass.
fn preplanned_run(
    world: &WorldConfig,
    sensor: &SensorModel,
    field: &FieldTruth,
    spec: &RunSpec,
    passes: usize,
    duration: Duration,
) -> RunOutput {
    let t_n = world.cover_time(spec.n_agents);
    let end_tn = duration.max_time_over_tn();
    let mut rng = stream_rng(spec.seed, streams::PREPLANNED);
    let curve = preplanned_baseline_mse(field, sensor, world, passes, spec.n_agents, &mut rng);
    let last_k = (end_tn * SAMPLES_PER_TN as f64).floor() as u32;
    let records: Vec<MetricsRecord> = (0..=last_k)
        .map(|k| {
            let time_s = sample_time(k, t_n);
            let done = ((k / SAMPLES_PER_TN) as usize).min(passes);
            MetricsRecord {
                time_s,
                time_over_tn: time_s / t_n,
                mse: curve[done].1,
                coverage_fraction: if done > 0 { 1.0 } else { 0.0 },
                coverage_time_s: (done > 0).then_some(t_n),
                pearson_r: None,
            }
        })
        .collect();
    let last = records.last().expect("at least one record");
    let passes_done = ((last_k / SAMPLES_PER_TN) as usize).min(passes) as u64;
    let summary = RunSummary {
        run_id: spec.run_id(),
        strategy: spec.strategy.label(),
        n_agents: spec.n_agents,
        range: spec.range.label(),
        seed: spec.seed,
        t_n_s: t_n,
        duration_s: last.time_s,
        final_mse: last.mse,
        coverage_time_s: last.coverage_time_s,
        coverage_over_tn: last.coverage_time_s.map(|_| 1.0),
        observations: passes_done * world.cells() as u64,
        transmissions: 0,
    };
    RunOutput {
        label: spec.label(),
        records,
        summary,
    }
}

/// Expands the matrix in strategy, N, R, seed order.
pub fn run_matrix(config: &ExperimentConfig) -> Vec<RunSpec> {
    let seeds = config.seeds.to_vec();
    let mut specs = Vec::with_capacity(config.run_count());
    for &strategy in &config.strategies {
        for &n_agents in &config.n_agents {
            for &range in &config.comm_ranges {
                for &seed in &seeds {
                    specs.push(RunSpec {
                        strategy,
                        n_agents,
                        range,
                        seed,
                    });
                }
            }
        }
    }
    specs
}

/// Output flags shared by every run of an experiment.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    pub jobs: usize,
    pub trace_messages: bool,
    pub snapshot_every: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    config_sha256: String,
    run_count: usize,
    seeds: Vec<u64>,
    runs: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Runs the whole matrix described by the config file at `path` and writes
/// per-run CSVs and summaries, `aggregate.csv` and `manifest.json`.
/// Returns the output directory.
pub fn run_experiment(path: &Path, options: &ExperimentOptions) -> anyhow::Result<PathBuf> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(raw.clone()).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let config = ExperimentConfig::parse(&text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let sensor = config.sensor.build(base)?;
    let out_dir = base.join(&config.output_dir);
    let runs_dir = out_dir.join("runs");
    fs::create_dir_all(&runs_dir).with_context(|| format!("creating {}", runs_dir.display()))?;

    let specs = run_matrix(&config);
    log::info!("{} runs into {}", specs.len(), out_dir.display());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .context("building worker pool")?;
    let outputs: Vec<RunOutput> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let id = spec.run_id();
                let run_options = RunOptions {
                    trace: options.trace_messages.then(|| runs_dir.join(format!("{id}.trace.txt"))),
                    snapshots: options
                        .snapshot_every
                        .map(|every| (runs_dir.join(format!("{id}.snapshots")), every)),
                };
                let output = execute(&config.world, &sensor, spec, config.duration, &run_options)
                    .with_context(|| format!("run {id}"))?;
                fs::write(runs_dir.join(format!("{id}.csv")), output.csv())?;
                let summary = serde_json::to_string_pretty(&output.summary)?;
                fs::write(runs_dir.join(format!("{id}.summary.json")), summary + "\n")?;
                log::info!("{id}: final mse {:.4}", output.summary.final_mse);
                Ok(output)
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;

    let mut aggregate = BufWriter::new(File::create(out_dir.join("aggregate.csv"))?);
    metrics::write_csv_header(&mut aggregate)?;
    for output in &outputs {
        metrics::write_csv_rows(&mut aggregate, &output.label, &output.records)?;
    }
    aggregate.flush()?;

    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: Sha256::digest(&raw).iter().map(|b| format!("{b:02x}")).collect(),
        run_count: specs.len(),
        seeds: config.seeds.to_vec(),
        runs: specs.iter().map(RunSpec::run_id).collect(),
        config: &config,
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(out_dir)
}

/// Writes the field for `seed` in the text grid format.
pub fn dump_field(config_path: &Path, seed: u64, out: &Path) -> anyhow::Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let field = field_for_seed(&config.world, seed)?;
    field.save(out, &config.world, seed)?;
    Ok(())
}
