//! Multi-seed experiments, aggregation and the horizon sweep.
//!
//! Runs fan out over a rayon pool; every run is keyed by its seed and the
//! aggregation walks runs in seed order, so results do not depend on the
//! worker count.

use std::fs;
use std::path::{Path, PathBuf};

use cmdp_psrl::agent::{run, RunConfig, RunRecord};
use cmdp_psrl::lp::solve_constrained_occupancy;
use cmdp_psrl::TabularCmdp;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::io::{aggregate_csv, fmt_f64, recorded_steps, run_csv, write_json, write_text};

/// Final-step statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub m_factor: u64,
    pub epoch_count: usize,
    pub final_avg_reward: f64,
    pub final_avg_costs: Vec<f64>,
    pub final_regret: f64,
    pub final_violations: Vec<f64>,
}

/// A run reduced to its recorded running averages.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub avg_reward: Vec<f64>,
    /// `avg_costs[k][i]`, raw direction.
    pub avg_costs: Vec<Vec<f64>>,
}

/// Mean and population standard deviation across runs at each recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub m_factor: u64,
    pub steps: Vec<usize>,
    pub mean_avg_reward: Vec<f64>,
    pub std_avg_reward: Vec<f64>,
    pub mean_avg_costs: Vec<Vec<f64>>,
    pub std_avg_costs: Vec<Vec<f64>>,
    /// Sorted by seed.
    pub runs: Vec<RunSummary>,
}

impl AggregateSeries {
    pub fn final_mean_reward(&self) -> f64 {
        *self.mean_avg_reward.last().expect("at least one recorded step")
    }

    pub fn final_mean_costs(&self) -> Vec<f64> {
        self.mean_avg_costs.iter().map(|c| *c.last().expect("at least one recorded step")).collect()
    }

    pub fn mean_final_regret(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.final_regret))
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Shared settings of a batch of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSpec {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub m_factor: u64,
    pub stride: usize,
    pub run_config: RunConfig,
    /// Directory for per-run CSVs; none are written when `None`.
    pub csv_dir: Option<PathBuf>,
}

impl BatchSpec {
    pub fn from_config(config: &ExperimentConfig, m_factor: u64, horizon: usize) -> Self {
        let mut run_config = RunConfig::new(horizon, config.base_seed).with_m_factor(m_factor);
        run_config.infeasible_fallback = config.infeasible_fallback.into();
        run_config.initial_state = (&config.initial_state).into();
        Self {
            horizon,
            seeds: (0..config.num_runs as u64).map(|i| config.base_seed + i).collect(),
            m_factor,
            stride: config.downsample_stride,
            run_config,
            csv_dir: None,
        }
    }
}

pub fn run_file_name(seed: u64) -> String {
    format!("run_{seed}.csv")
}

fn reduce(record: &RunRecord, seed: u64, m_factor: u64, stride: usize) -> RunOutput {
    let horizon = record.horizon();
    let k_n = record.num_constraints();
    let mut avg_reward = Vec::new();
    let mut avg_costs = vec![Vec::new(); k_n];
    let mut reward_sum = 0.0;
    let mut cost_sums = vec![0.0; k_n];
    let mut keep = recorded_steps(horizon, stride).peekable();
    for t in 0..horizon {
        reward_sum += record.rewards[t];
        for (sum, c) in cost_sums.iter_mut().zip(&record.costs) {
            *sum += c[t];
        }
        if keep.peek() == Some(&t) {
            keep.next();
            let n = (t + 1) as f64;
            avg_reward.push(reward_sum / n);
            for (series, sum) in avg_costs.iter_mut().zip(&cost_sums) {
                series.push(sum / n);
            }
        }
    }
    let last = horizon - 1;
    let summary = RunSummary {
        seed,
        m_factor,
        epoch_count: record.epoch_count,
        final_avg_reward: reward_sum / horizon as f64,
        final_avg_costs: cost_sums.iter().map(|s| s / horizon as f64).collect(),
        final_regret: record.cum_regret[last],
        final_violations: record.violations.iter().map(|v| v[last]).collect(),
    };
    RunOutput { summary, avg_reward, avg_costs }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LabError::Config(format!("cannot start worker pool: {e}")))
}

/// Executes every seed of `spec` on up to `workers` threads. Output is in seed order.
pub fn run_batch(cmdp: &TabularCmdp, spec: &BatchSpec, workers: usize) -> Result<Vec<RunOutput>> {
    if let Some(dir) = &spec.csv_dir {
        fs::create_dir_all(dir).map_err(LabError::io(dir))?;
    }
    let mut outputs = pool(workers)?.install(|| {
        spec.seeds
            .par_iter()
            .map(|&seed| {
                let config = RunConfig { horizon: spec.horizon, seed, m_factor: spec.m_factor, ..spec.run_config.clone() };
                let record = run(cmdp, &config)?;
                if let Some(dir) = &spec.csv_dir {
                    write_text(&dir.join(run_file_name(seed)), &run_csv(&record, spec.stride))?;
                }
                Ok(reduce(&record, seed, spec.m_factor, spec.stride))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    outputs.sort_by_key(|o| o.summary.seed);
    Ok(outputs)
}

/// Population mean and standard deviation at each recorded step.
pub fn aggregate(m_factor: u64, steps: Vec<usize>, outputs: &[RunOutput]) -> AggregateSeries {
    assert!(!outputs.is_empty(), "aggregate needs at least one run");
    let mut sorted: Vec<&RunOutput> = outputs.iter().collect();
    sorted.sort_by_key(|o| o.summary.seed);
    let k_n = sorted[0].avg_costs.len();
    let column_stats = |pick: &dyn Fn(&RunOutput) -> &[f64]| {
        let n = sorted.len() as f64;
        let len = pick(sorted[0]).len();
        let mut means = Vec::with_capacity(len);
        let mut stds = Vec::with_capacity(len);
        for i in 0..len {
            let m = sorted.iter().map(|o| pick(o)[i]).sum::<f64>() / n;
            let var = sorted.iter().map(|o| (pick(o)[i] - m).powi(2)).sum::<f64>() / n;
            means.push(m);
            stds.push(var.sqrt());
        }
        (means, stds)
    };
    let (mean_avg_reward, std_avg_reward) = column_stats(&|o| &o.avg_reward);
    let (mean_avg_costs, std_avg_costs) = (0..k_n).map(|k| column_stats(&|o| &o.avg_costs[k])).unzip();
    AggregateSeries {
        m_factor,
        steps,
        mean_avg_reward,
        std_avg_reward,
        mean_avg_costs,
        std_avg_costs,
        runs: sorted.iter().map(|o| o.summary.clone()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub m_factor: u64,
    pub directory: PathBuf,
    pub aggregate_file: PathBuf,
    pub runs: Vec<RunSummary>,
}

/// Written as `manifest.json` next to the experiment outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub lambda_star: f64,
    pub results: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

pub fn m_dir_name(m_factor: u64) -> String {
    format!("m{m_factor}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub lambda_star: f64,
    pub series: Vec<AggregateSeries>,
    pub manifest_path: PathBuf,
}

fn echo(config: &ExperimentConfig) -> String {
    serde_json::to_string(config).unwrap_or_else(|_| format!("{config:?}"))
}

fn infeasible_with_config(config: &ExperimentConfig) -> impl Fn(LabError) -> LabError + '_ {
    move |e| match e {
        LabError::Model(cmdp_psrl::Error::TrueModelInfeasible | cmdp_psrl::Error::Infeasible) => {
            LabError::Infeasible { context: echo(config) }
        }
        other => other,
    }
}

/// Builds the configured model and solves for its constrained optimum.
pub fn load_model(config: &ExperimentConfig) -> Result<(TabularCmdp, f64)> {
    let cmdp = config.environment.build()?;
    let lambda_star = solve_constrained_occupancy(&cmdp, None)
        .map_err(|e| infeasible_with_config(config)(e.into()))?
        .optimal_value;
    Ok((cmdp, lambda_star))
}

/// Runs `num_runs` seeds for every trigger factor, writing per-run CSVs, one
/// aggregate CSV per factor and the manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let (cmdp, lambda_star) = load_model(config)?;
    let workers = config.worker_count()?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(LabError::io(out))?;

    let steps: Vec<usize> = recorded_steps(config.horizon, config.downsample_stride).collect();
    let mut series = Vec::new();
    let mut results = Vec::new();
    for &m in &config.m_factors {
        let dir = PathBuf::from(m_dir_name(m));
        let mut spec = BatchSpec::from_config(config, m, config.horizon);
        spec.csv_dir = Some(out.join(&dir));
        let outputs = run_batch(&cmdp, &spec, workers).map_err(infeasible_with_config(config))?;
        let agg = aggregate(m, steps.clone(), &outputs);
        let aggregate_file = dir.join(AGGREGATE_FILE);
        write_text(&out.join(&aggregate_file), &aggregate_csv(&agg))?;
        results.push(ManifestEntry { m_factor: m, directory: dir, aggregate_file, runs: agg.runs.clone() });
        series.push(agg);
    }
    let manifest = Manifest { version: env!("CARGO_PKG_VERSION").to_string(), config: config.clone(), lambda_star, results };
    let manifest_path = out.join(MANIFEST_FILE);
    write_json(&manifest_path, &manifest)?;
    Ok(ExperimentReport { lambda_star, series, manifest_path })
}

/// Reads a manifest and reruns its configuration into `output_dir`.
pub fn rerun_manifest(manifest_path: &Path, output_dir: &Path) -> Result<ExperimentReport> {
    let manifest: Manifest = crate::io::read_json(manifest_path)?;
    let config = ExperimentConfig { output_dir: output_dir.to_path_buf(), ..manifest.config };
    run_experiment(&config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub horizon: usize,
    pub mean_regret: f64,
    pub mean_violations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub m_factor: u64,
    pub num_runs: usize,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln(mean regret)` on `ln T`; `None` when some
    /// mean regret is not positive.
    pub regret_slope: Option<f64>,
}

pub const SCALING_CSV: &str = "scaling.csv";
pub const SCALING_JSON: &str = "scaling.json";

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

pub fn scaling_csv(table: &ScalingTable) -> String {
    let k_n = table.rows.first().map_or(0, |r| r.mean_violations.len());
    let mut out = String::from("horizon,mean_regret");
    for k in 1..=k_n {
        out.push_str(&format!(",mean_viol_{k}"));
    }
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!("{},{}", row.horizon, fmt_f64(row.mean_regret)));
        for v in &row.mean_violations {
            out.push_str(&format!(",{}", fmt_f64(*v)));
        }
        out.push('\n');
    }
    out
}

/// Mean final regret and violations at each horizon for the first trigger
/// factor of `config`, plus the fitted log-log regret slope.
pub fn scaling_study(config: &ExperimentConfig, horizons: &[usize]) -> Result<ScalingTable> {
    config.validate()?;
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] == 0 {
        return Err(LabError::Config("horizons must be positive and strictly ascending".into()));
    }
    let (cmdp, _) = load_model(config)?;
    let workers = config.worker_count()?;
    let m = config.m_factors[0];
    let mut rows = Vec::new();
    for &horizon in horizons {
        let spec = BatchSpec { stride: horizon, ..BatchSpec::from_config(config, m, horizon) };
        let outputs = run_batch(&cmdp, &spec, workers).map_err(infeasible_with_config(config))?;
        let k_n = cmdp.num_constraints();
        rows.push(ScalingRow {
            horizon,
            mean_regret: mean(outputs.iter().map(|o| o.summary.final_regret)),
            mean_violations: (0..k_n)
                .map(|k| mean(outputs.iter().map(|o| o.summary.final_violations[k])))
                .collect(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.horizon as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_regret).collect();
    let table = ScalingTable { m_factor: m, num_runs: config.num_runs, regret_slope: log_log_slope(&xs, &ys), rows };

    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(LabError::io(out))?;
    write_text(&out.join(SCALING_CSV), &scaling_csv(&table))?;
    write_json(&out.join(SCALING_JSON), &table)?;
    Ok(table)
}
