//! Command-line front end: configuration parsing, run orchestration and
//! result files.

pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use log::info;
use pinch_ee::harness::{run_experiment_with, ExperimentSpec, RunOptions, Sweep, SweepResult};
use pinch_ee::model::watts_to_dbm;
use pinch_ee::streams::stream_rng;
use pinch_ee::{harness, solve_scheme, EESolution, SchemeKind, UserSet};

use crate::config::{Config, ExperimentKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Solve one user drop with every configured scheme.
    Solve,
    /// Run a Monte Carlo sweep.
    Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Fig2,
    Fig3,
    Fig4,
    Custom,
}

impl From<Experiment> for ExperimentKind {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Fig2 => ExperimentKind::Fig2,
            Experiment::Fig3 => ExperimentKind::Fig3,
            Experiment::Fig4 => ExperimentKind::Fig4,
            Experiment::Custom => ExperimentKind::Custom,
        }
    }
}

/// Energy-efficient NOMA uplink with a pinching antenna.
#[derive(Debug, Clone, Parser)]
#[command(version, about)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Mode::Experiment)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = Experiment::Fig2)]
    pub experiment: Experiment,
    /// Flat key = value configuration file; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Master seed, overriding the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per sweep point, overriding the config file.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value = "info")]
    pub log_level: log::LevelFilter,
}

/// What a run produced.
#[derive(Debug)]
pub enum Outcome {
    Experiment(SweepResult),
    Solve(Vec<(SchemeKind, EESolution)>),
}

/// Loads the config and applies command-line overrides.
pub fn load_config(args: &Args) -> Result<Config> {
    let mut config = match &args.config {
        Some(path) => Config::from_path(path)?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        anyhow::ensure!(trials >= 1, "--trials must be at least 1");
        config.trials = trials;
    }
    Ok(config)
}

/// Runs the requested mode and writes result files under `args.out`.
/// Progress goes to the log; `summary` receives the final table.
pub fn run(args: &Args, summary: &mut dyn Write) -> Result<Outcome> {
    let config = load_config(args)?;
    match args.mode {
        Mode::Experiment => {
            let spec = config.experiment_spec(args.experiment.into())?;
            let result = run_sweep(&spec, config.workers)?;
            let files = output::emit_results(&result, &args.out)?;
            for file in &files {
                info!("wrote {}", file.display());
            }
            write_sweep_summary(&result, summary)?;
            Ok(Outcome::Experiment(result))
        }
        Mode::Solve => {
            let SolvedDrop {
                users,
                solutions,
                spec,
            } = solve_once(&config)?;
            let files = output::emit_solution(
                &users,
                &solutions,
                &spec.spec_hash(),
                spec.master_seed,
                &args.out,
            )?;
            for file in &files {
                info!("wrote {}", file.display());
            }
            write_solve_summary(&solutions, summary)?;
            Ok(Outcome::Solve(solutions))
        }
    }
}

fn run_sweep(spec: &ExperimentSpec, workers: Option<usize>) -> Result<SweepResult> {
    info!(
        "sweeping {} over {} points, {} trials each, seed {}",
        spec.sweep.param_name(),
        spec.sweep.values().len(),
        spec.trials,
        spec.master_seed
    );
    let progress = |index: usize, count: usize, value: f64| {
        info!(
            "point {}/{count}: {} = {value} done",
            index + 1,
            spec.sweep.param_name()
        );
    };
    let opts = RunOptions {
        workers,
        progress: Some(&progress),
    };
    run_experiment_with(spec, &opts).context("experiment failed")
}

struct SolvedDrop {
    users: UserSet,
    solutions: Vec<(SchemeKind, EESolution)>,
    /// One-point experiment describing the drop, for the manifest.
    spec: ExperimentSpec,
}

/// Solves a single drop: the configured users, or trial 0 of a one-point
/// experiment at the base scenario.
fn solve_once(config: &Config) -> Result<SolvedDrop> {
    let spec = ExperimentSpec {
        sweep: Sweep::MaxPowerDbm(vec![watts_to_dbm(config.max_power_w)]),
        trials: 1,
        base_scenario: config.scenario,
        max_power_w: config.max_power_w,
        n_users: config.n_users,
        schemes: config.schemes.clone(),
        master_seed: config.master_seed,
        solver: config.solver,
    };
    spec.validate()?;
    let users = match config.explicit_users()? {
        Some(users) => users,
        None => harness::generate_users(
            &config.scenario,
            config.n_users,
            config.max_power_w,
            &mut stream_rng(config.master_seed, 0),
        )?,
    };
    let solutions = config
        .schemes
        .iter()
        .map(|&kind| {
            let solution =
                solve_scheme(kind, &config.scenario, &users, &spec.trial_solver(kind, 0))
                    .with_context(|| format!("{kind} solve failed"))?;
            Ok((kind, solution))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolvedDrop {
        users,
        solutions,
        spec,
    })
}

fn write_sweep_summary(result: &SweepResult, out: &mut dyn Write) -> Result<()> {
    let schemes: Vec<SchemeKind> = result
        .points
        .first()
        .map(|p| p.schemes.iter().map(|s| s.scheme).collect())
        .unwrap_or_default();
    write!(out, "{:>16}", result.sweep_param)?;
    for scheme in &schemes {
        write!(out, " {:>16}", scheme.name())?;
    }
    writeln!(out)?;
    for point in &result.points {
        write!(out, "{:>16}", point.value)?;
        for stats in &point.schemes {
            write!(out, " {:>16.4}", stats.ee_mean)?;
        }
        writeln!(out)?;
    }
    let flagged: usize = result
        .points
        .iter()
        .flat_map(|p| &p.schemes)
        .map(|s| s.flagged)
        .sum();
    writeln!(out, "mean EE in bits/J; {flagged} flagged solves excluded")?;
    Ok(())
}

fn write_solve_summary(solutions: &[(SchemeKind, EESolution)], out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "{:>16} {:>12} {:>16} {:>12} {:>8}",
        "scheme", "antenna_x_m", "ee_bits_per_j", "power_w", "flagged"
    )?;
    for (kind, s) in solutions {
        writeln!(
            out,
            "{:>16} {:>12.4} {:>16.4} {:>12.6} {:>8}",
            kind.name(),
            s.antenna.x_m(),
            s.ee_bits_per_joule,
            s.total_power_w,
            s.flagged
        )?;
    }
    Ok(())
}
