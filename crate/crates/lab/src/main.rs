use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmdp_psrl::agent::{run, RunConfig};
use cmdp_psrl::envs::{build_queue_env, QueueSpec};
use cmdp_psrl::lp::solve_constrained_occupancy;
use cmdp_psrl::TabularCmdp;
use cmdp_lab::config::ExperimentConfig;
use cmdp_lab::experiment::{load_model, run_experiment, run_file_name, scaling_study};
use cmdp_lab::io::{fmt_f64, read_cmdp, run_csv, write_cmdp, write_text};
use cmdp_lab::{LabError, Result};

/// Posterior sampling for constrained MDPs: planning, runs and experiments.
#[derive(Parser)]
#[command(name = "cmdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the constrained LP on a known model and print the optimal policy.
    Plan {
        /// CMDP JSON file; the queue benchmark when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// A single learning run; writes its per-step CSV.
    Run(Overrides),
    /// Multi-seed experiment over every trigger factor.
    Experiment(Overrides),
    /// Mean regret and violations across horizons, with the log-log slope.
    Scaling {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated ascending horizons.
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        horizons: Vec<usize>,
    },
    /// Write the queue benchmark as a CMDP JSON file.
    ExportQueue {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Overrides {
    /// Experiment config JSON; the queue benchmark defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trigger factors, comma-separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::queue(10_000, 1, "out"),
        };
        if let Some(h) = self.horizon {
            config.horizon = h;
        }
        if let Some(n) = self.runs {
            config.num_runs = n;
        }
        if let Some(s) = self.seed {
            config.base_seed = s;
        }
        if let Some(m) = self.m {
            config.m_factors = m;
        }
        if let Some(out) = self.out {
            config.output_dir = out;
        }
        if let Some(stride) = self.stride {
            config.downsample_stride = stride;
        }
        if self.workers.is_some() {
            config.workers = self.workers;
        }
        config.validate()?;
        Ok(config)
    }
}

fn plan(model: Option<PathBuf>) -> Result<()> {
    let cmdp: TabularCmdp = match model {
        Some(path) => read_cmdp(&path)?,
        None => build_queue_env(&QueueSpec::default())?,
    };
    let solution = solve_constrained_occupancy(&cmdp, None).map_err(|e| match e {
        cmdp_psrl::Error::Infeasible => LabError::Infeasible { context: "no stationary policy meets every constraint".into() },
        other => other.into(),
    })?;
    let mut text = format!("optimal_value {}\n", fmt_f64(solution.optimal_value));
    for s in 0..cmdp.num_states() {
        let row: Vec<String> = solution.policy.row(s).iter().map(|p| format!("{p:.6}")).collect();
        text.push_str(&format!("policy[{s}] {}\n", row.join(" ")));
    }
    // a closed pipe (e.g. `| head`) is not an error here
    let _ = std::io::stdout().write_all(text.as_bytes());
    Ok(())
}

fn single_run(config: &ExperimentConfig) -> Result<()> {
    let (cmdp, _) = load_model(config)?;
    let m = config.m_factors[0];
    let mut run_config = RunConfig::new(config.horizon, config.base_seed).with_m_factor(m);
    run_config.infeasible_fallback = config.infeasible_fallback.into();
    run_config.initial_state = (&config.initial_state).into();
    let record = run(&cmdp, &run_config)?;
    std::fs::create_dir_all(&config.output_dir).map_err(|source| LabError::Io { path: config.output_dir.clone(), source })?;
    let path = config.output_dir.join(run_file_name(config.base_seed));
    write_text(&path, &run_csv(&record, config.downsample_stride))?;
    let last = record.horizon() - 1;
    println!("lambda_star {}", fmt_f64(record.lambda_star));
    println!("avg_reward {}", fmt_f64(record.average_reward(last)));
    println!("epochs {}", record.epoch_count);
    println!("regret {}", fmt_f64(record.cum_regret[last]));
    println!("wrote {}", path.display());
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Plan { model } => plan(model),
        Command::Run(overrides) => single_run(&overrides.resolve()?),
        Command::Experiment(overrides) => {
            let report = run_experiment(&overrides.resolve()?)?;
            println!("lambda_star {}", fmt_f64(report.lambda_star));
            for series in &report.series {
                println!(
                    "m={} final_mean_reward {} mean_regret {}",
                    series.m_factor,
                    fmt_f64(series.final_mean_reward()),
                    fmt_f64(series.mean_final_regret())
                );
            }
            println!("wrote {}", report.manifest_path.display());
            Ok(())
        }
        Command::Scaling { overrides, horizons } => {
            let config = overrides.resolve()?;
            let table = scaling_study(&config, &horizons)?;
            for row in &table.rows {
                println!("T={} mean_regret {}", row.horizon, fmt_f64(row.mean_regret));
            }
            match table.regret_slope {
                Some(slope) => println!("regret_slope {slope:.4}"),
                None => println!("regret_slope undefined"),
            }
            Ok(())
        }
        Command::ExportQueue { out } => {
            let cmdp = build_queue_env(&QueueSpec::default())?;
            write_cmdp(&out, &cmdp)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
