//! Experiment configuration, loaded from a single JSON document.
//!
//! ```json
//! {
//!   "environment": { "queue": { "buffer": 5,
//!                               "service_actions": [0.2, 0.4, 0.6, 0.8],
//!                               "flow_actions": [0.5, 0.6, 0.7, 0.8] } },
//!   "horizon": 100000,
//!   "num_runs": 20,
//!   "base_seed": 0,
//!   "m_factors": [1],
//!   "output_dir": "out",
//!   "downsample_stride": 100
//! }
//! ```
//!
//! `environment` may instead be `{ "model_file": "path/to/cmdp.json" }`;
//! relative paths resolve against the working directory.

use std::path::{Path, PathBuf};

use cmdp_psrl::agent::{InfeasibleFallback, InitialState};
use cmdp_psrl::envs::{build_queue_env, QueueSpec};
use cmdp_psrl::TabularCmdp;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::io::{read_cmdp, read_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig {
    pub buffer: usize,
    pub service_actions: Vec<f64>,
    pub flow_actions: Vec<f64>,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueSpec::default().into()
    }
}

impl From<QueueSpec> for QueueConfig {
    fn from(spec: QueueSpec) -> Self {
        Self { buffer: spec.buffer, service_actions: spec.service_actions, flow_actions: spec.flow_actions }
    }
}

impl From<&QueueConfig> for QueueSpec {
    fn from(cfg: &QueueConfig) -> Self {
        Self {
            buffer: cfg.buffer,
            service_actions: cfg.service_actions.clone(),
            flow_actions: cfg.flow_actions.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Queue(QueueConfig),
    ModelFile(PathBuf),
}

impl EnvironmentConfig {
    pub fn build(&self) -> Result<TabularCmdp> {
        match self {
            EnvironmentConfig::Queue(q) => Ok(build_queue_env(&q.into())?),
            EnvironmentConfig::ModelFile(path) => read_cmdp(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackConfig {
    #[default]
    KeepPreviousPolicy,
    Resample,
}

impl From<FallbackConfig> for InfeasibleFallback {
    fn from(f: FallbackConfig) -> Self {
        match f {
            FallbackConfig::KeepPreviousPolicy => InfeasibleFallback::KeepPreviousPolicy,
            FallbackConfig::Resample => InfeasibleFallback::Resample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStateConfig {
    Fixed(usize),
    Distribution(Vec<f64>),
}

impl Default for InitialStateConfig {
    fn default() -> Self {
        InitialStateConfig::Fixed(0)
    }
}

impl From<&InitialStateConfig> for InitialState {
    fn from(cfg: &InitialStateConfig) -> Self {
        match cfg {
            InitialStateConfig::Fixed(s) => InitialState::Fixed(*s),
            InitialStateConfig::Distribution(rho) => InitialState::Distribution(rho.clone()),
        }
    }
}

fn default_stride() -> usize {
    1
}

fn default_m_factors() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    pub horizon: usize,
    pub num_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_m_factors")]
    pub m_factors: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default = "default_stride")]
    pub downsample_stride: usize,
    /// Thread cap; falls back to `CMDP_WORKERS`, then to available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub infeasible_fallback: FallbackConfig,
    #[serde(default)]
    pub initial_state: InitialStateConfig,
}

impl ExperimentConfig {
    /// The queue benchmark with the given run shape.
    pub fn queue(horizon: usize, num_runs: usize, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            environment: EnvironmentConfig::Queue(QueueConfig::default()),
            horizon,
            num_runs,
            base_seed: 0,
            m_factors: default_m_factors(),
            output_dir: output_dir.into(),
            downsample_stride: 1,
            workers: None,
            infeasible_fallback: FallbackConfig::default(),
            initial_state: InitialStateConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config: Self = read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(LabError::Config("horizon must be at least 1".into()));
        }
        if self.num_runs == 0 {
            return Err(LabError::Config("num_runs must be at least 1".into()));
        }
        if self.downsample_stride == 0 {
            return Err(LabError::Config("downsample_stride must be at least 1".into()));
        }
        if self.m_factors.is_empty() || self.m_factors.contains(&0) {
            return Err(LabError::Config("m_factors must be a nonempty list of positive integers".into()));
        }
        if self.workers == Some(0) {
            return Err(LabError::Config("workers must be at least 1".into()));
        }
        if self.base_seed.checked_add(self.num_runs as u64).is_none() {
            return Err(LabError::Config("base_seed + num_runs overflows".into()));
        }
        Ok(())
    }

    /// Effective worker count.
    pub fn worker_count(&self) -> Result<usize> {
        if let Some(n) = self.workers {
            return Ok(n);
        }
        match std::env::var("CMDP_WORKERS") {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(LabError::Config(format!("CMDP_WORKERS must be a positive integer, got {v:?}"))),
            },
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}
