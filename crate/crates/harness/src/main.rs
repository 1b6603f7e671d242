use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hvac_core::baseline::BruteForceLimits;
use hvac_harness::commands;
use hvac_harness::config::{BaselineSpec, ExperimentSpec, Mode, ScenarioSource};
use hvac_harness::scenario::{generate_scenario, GeneratorParams};

/// Decentralized energy-cost scheduling for multi-zone HVAC systems.
#[derive(Parser)]
#[command(name = "hvac", version)]
struct Cli {
    /// Worker threads for zone subproblems and sweep cells.
    #[arg(long, env = "HVAC_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated scenario as TOML.
    Generate {
        #[arg(long, default_value_t = 5)]
        zones: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Stages in the horizon.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the whole horizon once and recover a schedule.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Reference methods to run alongside.
        #[arg(long, value_delimiter = ',')]
        baseline: Vec<BaselineName>,
    },
    /// Closed-loop receding-horizon control.
    Mpc {
        #[command(flatten)]
        common: Common,
        /// Planning horizon in stages.
        #[arg(short = 'H', long)]
        horizon: Option<usize>,
    },
    /// Sweep the penalty parameter or the number of zones.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long = "rho-values", value_delimiter = ',')]
        rho_values: Vec<f64>,
        #[arg(long = "zone-counts", value_delimiter = ',')]
        zone_counts: Vec<usize>,
        /// Run zone cells under receding-horizon control with this horizon.
        #[arg(short = 'H', long)]
        horizon: Option<usize>,
    },
    /// Compare against brute-force enumeration on a toy scenario.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.025)]
        resolution: f64,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BaselineName {
    Relaxed,
    Nonlinear,
    BruteForce,
}

#[derive(Args)]
struct Common {
    /// Experiment file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario file instead of a generated scenario.
    #[arg(long, conflicts_with_all = ["zones"])]
    scenario: Option<PathBuf>,
    #[arg(long)]
    zones: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Truncate or extend a generated scenario to this many stages.
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    /// Experiment spec plus the directory relative scenario paths resolve
    /// against.
    fn resolve(&self) -> Result<(ExperimentSpec, PathBuf)> {
        let (mut spec, base) = match &self.config {
            Some(p) => {
                let spec = ExperimentSpec::load(p).with_context(|| format!("loading {}", p.display()))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (spec, base)
            }
            None => (ExperimentSpec::generated(5, 1), PathBuf::from(".")),
        };
        if let Some(path) = &self.scenario {
            spec.scenario = ScenarioSource::File { path: path.clone() };
        }
        if self.zones.is_some() || self.seed.is_some() || self.stages.is_some() {
            match &mut spec.scenario {
                ScenarioSource::Generate { zones, seed, params } => {
                    *zones = self.zones.unwrap_or(*zones);
                    *seed = self.seed.unwrap_or(*seed);
                    params.horizon = self.stages.unwrap_or(params.horizon);
                }
                ScenarioSource::File { .. } => bail!("--zones, --seed and --stages apply to generated scenarios"),
            }
        }
        let s = &mut spec.solver;
        s.rho = self.rho.unwrap_or(s.rho);
        s.epsilon = self.eps.unwrap_or(s.epsilon);
        s.tau = self.tau.or(s.tau);
        s.max_iters = self.max_iters.unwrap_or(s.max_iters);
        if let Some(out) = &self.out {
            spec.output = out.clone();
        }
        Ok((spec, base))
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let summary = match cli.command {
        Command::Generate {
            zones,
            seed,
            horizon,
            out,
        } => {
            let mut params = GeneratorParams::default();
            params.horizon = horizon.unwrap_or(params.horizon);
            let scenario = generate_scenario(zones, seed, &params)?;
            hvac_harness::report::write_atomic(&out, scenario.to_toml()?.as_bytes())?;
            println!("{}", out.display());
            return Ok(());
        }
        Command::Solve { common, baseline } => {
            let (mut spec, base) = common.resolve()?;
            spec.mode = Mode::SingleShot;
            for b in baseline {
                spec.baselines.push(match b {
                    BaselineName::Relaxed => BaselineSpec::centralized_relaxed(),
                    BaselineName::Nonlinear => BaselineSpec::centralized_nonlinear(),
                    BaselineName::BruteForce => BaselineSpec::brute_force(0.025),
                });
            }
            commands::execute(&spec, &base, &spec.output)?
        }
        Command::Mpc { common, horizon } => {
            let (mut spec, base) = common.resolve()?;
            if let Some(h) = horizon {
                spec.mode = Mode::RecedingHorizon { horizon: h };
            } else if spec.mode == Mode::SingleShot {
                spec.mode = Mode::RecedingHorizon { horizon: 10 };
            }
            commands::execute(&spec, &base, &spec.output)?
        }
        Command::Sweep {
            common,
            rho_values,
            zone_counts,
            horizon,
        } => {
            let (mut spec, base) = common.resolve()?;
            if !rho_values.is_empty() {
                spec.sweep.rho = rho_values;
            }
            if !zone_counts.is_empty() {
                spec.sweep.zones = zone_counts;
            }
            if let Some(h) = horizon {
                spec.mode = Mode::RecedingHorizon { horizon: h };
            }
            if spec.sweep.rho.is_empty() && spec.sweep.zones.is_empty() {
                bail!("nothing to sweep: give --rho-values or --zone-counts");
            }
            commands::execute(&spec, &base, &spec.output)?
        }
        Command::Oracle { common, resolution } => {
            let (mut spec, base) = common.resolve()?;
            if common.config.is_none() && common.scenario.is_none() {
                if let ScenarioSource::Generate { zones, params, .. } = &mut spec.scenario {
                    *zones = common.zones.unwrap_or(2);
                    params.horizon = common.stages.unwrap_or(3);
                }
            }
            commands::oracle(&spec, &base, resolution, BruteForceLimits::default(), &spec.output)?
        }
    };
    println!("{}", summary.display());
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
