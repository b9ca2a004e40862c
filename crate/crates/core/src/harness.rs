//! Seeded Monte Carlo sweeps over every scheme.
//!
//! Trial `t` draws its user drop from its own counter-based stream, and every
//! scheme solves that same drop, so schemes are compared on paired samples.
//! The drop and solver seeds do not depend on the sweep point either: the
//! same underlying uniforms are reused at each sweep value (common random
//! numbers), which keeps trend curves free of resampling noise.

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::ao::{solve_scheme, AoConfig, SchemeKind};
use crate::error::{Error, Result};
use crate::model::{dbm_to_watts, EESolution, Scenario, UserSet};
use crate::streams::{derive_seed, stream_rng};

/// Flagged solves are dropped from the averages only while they stay below
/// this fraction of the trials; beyond it the run fails.
pub const MAX_FLAGGED_FRACTION: f64 = 1e-3;

/// The swept parameter and its grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Per-user power cap, dBm.
    MaxPowerDbm(Vec<f64>),
    /// Fixed circuit power, dBm.
    FixedPowerDbm(Vec<f64>),
    /// Service-area length in meters; the waveguide spans it (`L = D_x`).
    AreaLengthM(Vec<f64>),
}

impl Sweep {
    pub fn param_name(&self) -> &'static str {
        match self {
            Sweep::MaxPowerDbm(_) => "max_power_dbm",
            Sweep::FixedPowerDbm(_) => "fixed_power_dbm",
            Sweep::AreaLengthM(_) => "area_x_m",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Sweep::MaxPowerDbm(v) | Sweep::FixedPowerDbm(v) | Sweep::AreaLengthM(v) => v,
        }
    }

    /// Builds a sweep from its parameter name.
    pub fn from_param(name: &str, values: Vec<f64>) -> Result<Self> {
        match name {
            "max_power_dbm" => Ok(Sweep::MaxPowerDbm(values)),
            "fixed_power_dbm" => Ok(Sweep::FixedPowerDbm(values)),
            "area_x_m" => Ok(Sweep::AreaLengthM(values)),
            other => Err(Error::InvalidExperiment(format!(
                "unknown sweep parameter `{other}`"
            ))),
        }
    }

    /// Scenario and per-user cap at one sweep value.
    fn apply(&self, base: &Scenario, base_cap_w: f64, value: f64) -> (Scenario, f64) {
        let mut scenario = *base;
        let mut cap = base_cap_w;
        match self {
            Sweep::MaxPowerDbm(_) => cap = dbm_to_watts(value),
            Sweep::FixedPowerDbm(_) => scenario.fixed_power_w = dbm_to_watts(value),
            Sweep::AreaLengthM(_) => {
                scenario.area_x_m = value;
                scenario.waveguide_length_m = value;
            }
        }
        (scenario, cap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub sweep: Sweep,
    pub trials: usize,
    pub base_scenario: Scenario,
    /// Per-user power cap used when the sweep does not override it.
    pub max_power_w: f64,
    pub n_users: usize,
    pub schemes: Vec<SchemeKind>,
    pub master_seed: u64,
    pub solver: AoConfig,
}

impl ExperimentSpec {
    /// Default evaluation setup around the given sweep: five users, 10 dBm
    /// caps, 1000 trials, all schemes.
    pub fn with_defaults(sweep: Sweep) -> Self {
        Self {
            sweep,
            trials: 1000,
            base_scenario: Scenario::evaluation_defaults(),
            max_power_w: dbm_to_watts(10.0),
            n_users: 5,
            schemes: SchemeKind::ALL.to_vec(),
            master_seed: 1,
            solver: AoConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values = self.sweep.values();
        if values.is_empty() {
            return Err(Error::InvalidExperiment("sweep grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidExperiment(
                "sweep values must be finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidExperiment(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if matches!(self.sweep, Sweep::AreaLengthM(_)) && values[0] <= 0.0 {
            return Err(Error::InvalidExperiment(
                "area lengths must be positive".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidExperiment("trials must be at least 1".into()));
        }
        if self.n_users == 0 {
            return Err(Error::InvalidExperiment(
                "n_users must be at least 1".into(),
            ));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidExperiment("no schemes selected".into()));
        }
        if !(self.max_power_w.is_finite() && self.max_power_w > 0.0) {
            return Err(Error::InvalidExperiment(format!(
                "max power must be positive, got {}",
                self.max_power_w
            )));
        }
        self.base_scenario.validate()?;
        for &value in values {
            self.sweep
                .apply(&self.base_scenario, self.max_power_w, value)
                .0
                .validate()?;
        }
        self.solver.validate()
    }

    /// Short hex digest identifying every input that affects the results.
    pub fn spec_hash(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Scenario and cap at sweep point `index`.
    pub fn point(&self, index: usize) -> (Scenario, f64) {
        self.sweep.apply(
            &self.base_scenario,
            self.max_power_w,
            self.sweep.values()[index],
        )
    }

    /// The user drop of trial `trial` at sweep point `index`.
    pub fn trial_users(&self, index: usize, trial: usize) -> Result<UserSet> {
        let (scenario, cap) = self.point(index);
        let mut rng = stream_rng(self.master_seed, trial_stream(trial, 0));
        generate_users(&scenario, self.n_users, cap, &mut rng)
    }

    /// The solver settings of `scheme` in trial `trial`.
    pub fn trial_solver(&self, scheme: SchemeKind, trial: usize) -> AoConfig {
        let slot = 1 + SchemeKind::ALL
            .iter()
            .position(|k| k.name() == scheme.name())
            .expect("every scheme is listed in ALL") as u64;
        self.solver
            .with_seed(derive_seed(self.master_seed, trial_stream(trial, slot)))
    }
}

fn trial_stream(trial: usize, slot: u64) -> u64 {
    ((trial as u64) << 8) | slot
}

/// Uniform user drop over the service area, every user capped at `cap_w`.
pub fn generate_users(
    scenario: &Scenario,
    n: usize,
    cap_w: f64,
    rng: &mut impl Rng,
) -> Result<UserSet> {
    let half_y = scenario.area_y_m / 2.0;
    let positions = (0..n)
        .map(|_| {
            let x = rng.gen_range(0.0..=scenario.area_x_m);
            let y = rng.gen_range(-half_y..=half_y);
            (x, y)
        })
        .collect();
    UserSet::with_uniform_cap(positions, cap_w)
}

/// Statistics of one scheme at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeStats {
    pub scheme: SchemeKind,
    pub ee_mean: f64,
    /// Sample standard deviation (zero for a single trial).
    pub ee_std: f64,
    /// Trials entering the mean.
    pub trials: usize,
    pub flagged: usize,
    /// EE of every trial in trial order, flagged ones included.
    pub ee_per_trial: Vec<f64>,
    pub flagged_per_trial: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub schemes: Vec<SchemeStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sweep_param: &'static str,
    pub points: Vec<SweepPoint>,
    pub master_seed: u64,
    pub spec_hash: String,
}

impl SweepResult {
    pub fn stats(&self, point: usize, scheme: SchemeKind) -> Option<&SchemeStats> {
        self.points
            .get(point)?
            .schemes
            .iter()
            .find(|s| s.scheme.name() == scheme.name())
    }

    /// Mean EE of `scheme` across the sweep, in sweep order.
    pub fn mean_curve(&self, scheme: SchemeKind) -> Vec<f64> {
        (0..self.points.len())
            .filter_map(|i| self.stats(i, scheme).map(|s| s.ee_mean))
            .collect()
    }
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Run options that do not change the results.
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Called after each sweep point with `(point index, point count, value)`.
    pub progress: Option<&'a (dyn Fn(usize, usize, f64) + Sync)>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    run_experiment_with(spec, &RunOptions::default())
}

pub fn run_experiment_with(spec: &ExperimentSpec, opts: &RunOptions<'_>) -> Result<SweepResult> {
    spec.validate()?;
    match opts.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
            pool.install(|| run_points(spec, opts))
        }
        None => run_points(spec, opts),
    }
}

fn run_points(spec: &ExperimentSpec, opts: &RunOptions<'_>) -> Result<SweepResult> {
    let values = spec.sweep.values();
    let mut points = Vec::with_capacity(values.len());

    for (index, &value) in values.iter().enumerate() {
        let (scenario, _) = spec.point(index);
        // trials[t][k]: solution of scheme k on drop t
        let trials: Vec<Vec<EESolution>> = (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                let users = spec.trial_users(index, t)?;
                spec.schemes
                    .iter()
                    .map(|&kind| solve_scheme(kind, &scenario, &users, &spec.trial_solver(kind, t)))
                    .collect()
            })
            .collect::<Result<_>>()?;

        let schemes = spec
            .schemes
            .iter()
            .enumerate()
            .map(|(k, &scheme)| aggregate(scheme, value, trials.iter().map(|row| &row[k])))
            .collect::<Result<_>>()?;
        points.push(SweepPoint { value, schemes });

        if let Some(progress) = opts.progress {
            progress(index, values.len(), value);
        }
    }

    Ok(SweepResult {
        sweep_param: spec.sweep.param_name(),
        points,
        master_seed: spec.master_seed,
        spec_hash: spec.spec_hash(),
    })
}

fn aggregate<'a>(
    scheme: SchemeKind,
    sweep_value: f64,
    solutions: impl Iterator<Item = &'a EESolution>,
) -> Result<SchemeStats> {
    let (ee_per_trial, flagged_per_trial): (Vec<f64>, Vec<bool>) =
        solutions.map(|s| (s.ee_bits_per_joule, s.flagged)).unzip();
    let total = ee_per_trial.len();
    let flagged = flagged_per_trial.iter().filter(|&&f| f).count();
    if flagged > 0 && flagged as f64 >= MAX_FLAGGED_FRACTION * total as f64 {
        return Err(Error::TooManyFlagged {
            scheme: scheme.name().to_string(),
            sweep_value,
            flagged,
            total,
        });
    }
    let kept: Vec<f64> = ee_per_trial
        .iter()
        .zip(&flagged_per_trial)
        .filter(|(_, &f)| !f)
        .map(|(&ee, _)| ee)
        .collect();
    let (ee_mean, ee_std) = mean_and_std(&kept);
    Ok(SchemeStats {
        scheme,
        ee_mean,
        ee_std,
        trials: kept.len(),
        flagged,
        ee_per_trial,
        flagged_per_trial,
    })
}
