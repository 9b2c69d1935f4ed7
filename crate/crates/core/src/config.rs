//! Experiment configuration files (JSON, or TOML by extension).

use crate::comms::CommRange;
use crate::sensor::{SensorError, SensorModel};
use crate::strategy::StrategyConfig;
use crate::world::WorldConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("sensor: {0}")]
    Sensor(#[from] SensorError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Where the confusion table comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SensorSpec {
    /// CSV file, relative to the config file's directory.
    Path(PathBuf),
    /// Discretised Gaussian with standard deviation `sigma0 + sigma1 w`.
    Synthetic { n_w: usize, sigma0: f64, sigma1: f64 },
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec::Synthetic {
            n_w: 12,
            sigma0: 0.5,
            sigma1: 0.1,
        }
    }
}

impl SensorSpec {
    pub fn build(&self, base_dir: &Path) -> Result<SensorModel, ConfigError> {
        Ok(match self {
            SensorSpec::Path(p) => SensorModel::load(base_dir.join(p))?,
            SensorSpec::Synthetic { n_w, sigma0, sigma1 } => SensorModel::synthesize(*n_w, *sigma0, *sigma1)?,
        })
    }
}

/// How long each run lasts, in units of its own `T_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Duration {
    TimeOverTn(f64),
    /// Stop once every cell has been visited, or at the cap.
    UntilCovered { max_time_over_tn: f64 },
}

impl Duration {
    pub fn max_time_over_tn(self) -> f64 {
        match self {
            Duration::TimeOverTn(m) => m,
            Duration::UntilCovered { max_time_over_tn } => max_time_over_tn,
        }
    }
}

/// Explicit list, or `count` consecutive seeds from `first`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { first: u64, count: u64 },
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { first, count } => (*first..first + count).collect(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// A full experiment: the run matrix is strategies × swarm sizes × comm
/// ranges × seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub sensor: SensorSpec,
    pub strategies: Vec<StrategyConfig>,
    pub n_agents: Vec<usize>,
    pub comm_ranges: Vec<CommRange>,
    pub duration: Duration,
    pub seeds: Seeds,
    /// Relative to the config file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let parsed = if is_toml {
            toml::from_str(text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(text).map_err(|e| e.to_string())
        };
        let config: Self = parsed.map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.world.validate().map_err(|e| invalid("world", e.to_string()))?;
        if let SensorSpec::Synthetic { n_w, .. } = self.sensor {
            if n_w != self.world.n_w {
                return Err(invalid(
                    "sensor.synthetic.n_w",
                    format!("{n_w} does not match world.n_w = {}", self.world.n_w),
                ));
            }
        }
        if self.strategies.is_empty() {
            return Err(invalid("strategies", "must not be empty"));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            s.validate().map_err(|m| invalid(format!("strategies[{i}]"), m))?;
        }
        if self.n_agents.is_empty() {
            return Err(invalid("n_agents", "must not be empty"));
        }
        for (i, &n) in self.n_agents.iter().enumerate() {
            if n == 0 || n > self.world.cells() {
                return Err(invalid(
                    format!("n_agents[{i}]"),
                    format!("{n} agents do not fit on {} distinct cells", self.world.cells()),
                ));
            }
        }
        if self.comm_ranges.is_empty() {
            return Err(invalid("comm_ranges", "must not be empty"));
        }
        let m = self.duration.max_time_over_tn();
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid("duration", format!("must be a positive multiple of T_N, got {m}")));
        }
        let seeds = self.seeds.to_vec();
        if seeds.is_empty() {
            return Err(invalid("seeds", "must not be empty"));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(invalid("seeds", "contains duplicates"));
        }
        Ok(())
    }

    /// Number of runs in the matrix.
    pub fn run_count(&self) -> usize {
        self.strategies.len() * self.n_agents.len() * self.comm_ranges.len() * self.seeds.to_vec().len()
    }
}
