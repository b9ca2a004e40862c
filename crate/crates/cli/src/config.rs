//! Flat `key = value` run configuration.
//!
//! The file is TOML without tables. Physical quantities carry their unit in
//! the key name (`*_dbm`, `*_ghz`, `*_m`) and are converted to SI here, once.
//! Every key is optional; missing keys take the default evaluation values.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use pinch_ee::ao::DEFAULT_GRID_STEP_M;
use pinch_ee::harness::{ExperimentSpec, Sweep};
use pinch_ee::model::{dbm_to_watts, SPEED_OF_LIGHT_M_PER_S};
use pinch_ee::{AoConfig, Scenario, SchemeKind, UserSet};
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: expected {expected}")]
    WrongType { key: String, expected: &'static str },
    #[error("key `{key}`: {message}")]
    OutOfRange { key: String, message: String },
    #[error("key `{key}` is required for this experiment")]
    Missing { key: String },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] pinch_ee::Error),
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Named experiment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// EE versus per-user power cap.
    Fig2,
    /// EE versus fixed circuit power.
    Fig3,
    /// EE versus service-area length with `L = D_x`.
    Fig4,
    /// Sweep taken from the config file.
    Custom,
}

impl ExperimentKind {
    pub fn preset(self) -> Option<Sweep> {
        match self {
            ExperimentKind::Fig2 => Some(Sweep::MaxPowerDbm(vec![
                -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0,
            ])),
            ExperimentKind::Fig3 => Some(Sweep::FixedPowerDbm(vec![0.0, 5.0, 10.0, 15.0, 20.0])),
            ExperimentKind::Fig4 => Some(Sweep::AreaLengthM(vec![40.0, 80.0, 120.0, 160.0])),
            ExperimentKind::Custom => None,
        }
    }
}

/// Parsed configuration with every value in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: Scenario,
    pub max_power_w: f64,
    pub n_users: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub schemes: Vec<SchemeKind>,
    pub sweep_param: Option<String>,
    pub sweep_values: Option<Vec<f64>>,
    pub solver: AoConfig,
    pub workers: Option<usize>,
    pub user_x_m: Option<Vec<f64>>,
    pub user_y_m: Option<Vec<f64>>,
}

impl Default for Config {
    fn default() -> Self {
        Self::parse_str("").expect("empty config is valid")
    }
}

struct Keys {
    table: Table,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.table.remove(key)
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(f)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(_) => Err(wrong(key, "a number")),
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.float(key)?.unwrap_or(default);
        if !(v.is_finite() && v > 0.0) {
            return Err(range(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn dbm(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.float(key)?.unwrap_or(default);
        if !v.is_finite() {
            return Err(range(key, format!("must be finite, got {v}")));
        }
        Ok(dbm_to_watts(v))
    }

    fn integer(&mut self, key: &str) -> Result<Option<i64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(i)),
            Some(_) => Err(wrong(key, "an integer")),
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> Result<usize> {
        match self.integer(key)? {
            None => Ok(default),
            Some(i) if i >= min as i64 => Ok(i as usize),
            Some(i) => Err(range(key, format!("must be at least {min}, got {i}"))),
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(b),
            Some(_) => Err(wrong(key, "true or false")),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(wrong(key, "a string")),
        }
    }

    fn floats(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(value) = self.take(key) else {
            return Ok(None);
        };
        let Value::Array(items) = value else {
            return Err(wrong(key, "an array of numbers"));
        };
        items
            .into_iter()
            .map(|item| match item {
                Value::Float(f) if f.is_finite() => Ok(f),
                Value::Integer(i) => Ok(i as f64),
                _ => Err(wrong(key, "an array of finite numbers")),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn strings(&mut self, key: &str) -> Result<Option<Vec<String>>> {
        let Some(value) = self.take(key) else {
            return Ok(None);
        };
        let Value::Array(items) = value else {
            return Err(wrong(key, "an array of strings"));
        };
        items
            .into_iter()
            .map(|item| match item {
                Value::String(s) => Ok(s),
                _ => Err(wrong(key, "an array of strings")),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

fn wrong(key: &str, expected: &'static str) -> ConfigError {
    ConfigError::WrongType {
        key: key.to_string(),
        expected,
    }
}

fn range(key: &str, message: String) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        message,
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut keys = Keys { table };

        let area_x_m = keys.positive("area_x_m", 120.0)?;
        let waveguide = keys.float("waveguide_length_m")?;
        let waveguide_length_m = match waveguide {
            Some(v) if !(v.is_finite() && v > 0.0) => {
                return Err(range(
                    "waveguide_length_m",
                    format!("must be positive, got {v}"),
                ))
            }
            Some(v) => v,
            None => area_x_m,
        };
        let scenario = Scenario {
            carrier_frequency_hz: keys.positive("carrier_frequency_ghz", 28.0)? * 1e9,
            wave_speed_m_per_s: SPEED_OF_LIGHT_M_PER_S,
            antenna_height_m: keys.positive("antenna_height_m", 3.0)?,
            waveguide_length_m,
            area_x_m,
            area_y_m: keys.positive("area_y_m", 20.0)?,
            noise_power_w: keys.dbm("noise_power_dbm", -90.0)?,
            fixed_power_w: keys.dbm("fixed_power_dbm", 10.0)?,
        };
        let max_power_w = keys.dbm("max_power_dbm", 10.0)?;
        let n_users = keys.count("n_users", 5, 1)?;
        let trials = keys.count("trials", 1000, 1)?;
        let master_seed = match keys.integer("master_seed")? {
            None => 1,
            Some(i) if i >= 0 => i as u64,
            Some(i) => {
                return Err(range(
                    "master_seed",
                    format!("must be non-negative, got {i}"),
                ))
            }
        };

        let grid_step_m = keys.positive("exhaustive_grid_step_m", DEFAULT_GRID_STEP_M)?;
        let schemes = match keys.strings("schemes")? {
            None => SchemeKind::ALL.to_vec(),
            Some(names) if names.is_empty() => {
                return Err(range("schemes", "must name at least one scheme".into()))
            }
            Some(names) => names
                .iter()
                .map(|name| {
                    name.parse::<SchemeKind>()
                        .map_err(|_| range("schemes", format!("unknown scheme `{name}`")))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let schemes = schemes
            .into_iter()
            .map(|k| match k {
                SchemeKind::NomaExhaustive { .. } => SchemeKind::NomaExhaustive { grid_step_m },
                other => other,
            })
            .collect();

        let defaults = AoConfig::default();
        let mut solver = defaults;
        solver.dinkelbach.tolerance =
            keys.positive("dinkelbach_tolerance", defaults.dinkelbach.tolerance)?;
        solver.dinkelbach.max_iterations = keys.count(
            "dinkelbach_max_iterations",
            defaults.dinkelbach.max_iterations,
            1,
        )?;
        solver.dinkelbach.warm_start =
            keys.boolean("dinkelbach_warm_start", defaults.dinkelbach.warm_start)?;
        solver.pso.swarm_size = keys.count("pso_swarm_size", defaults.pso.swarm_size, 2)?;
        solver.pso.max_iterations =
            keys.count("pso_max_iterations", defaults.pso.max_iterations, 1)?;
        solver.pso.inertia_weight = keys
            .float("pso_inertia_weight")?
            .unwrap_or(defaults.pso.inertia_weight);
        solver.pso.cognitive_coeff = keys
            .float("pso_cognitive_coeff")?
            .unwrap_or(defaults.pso.cognitive_coeff);
        solver.pso.social_coeff = keys
            .float("pso_social_coeff")?
            .unwrap_or(defaults.pso.social_coeff);
        solver.pso.velocity_clamp_fraction = keys.positive(
            "pso_velocity_clamp_fraction",
            defaults.pso.velocity_clamp_fraction,
        )?;
        solver.pso.stall_tolerance =
            keys.positive("pso_stall_tolerance", defaults.pso.stall_tolerance)?;
        solver.pso.stall_iterations =
            keys.count("pso_stall_iterations", defaults.pso.stall_iterations, 1)?;
        solver.max_outer_iterations =
            keys.count("ao_max_outer_iterations", defaults.max_outer_iterations, 1)?;
        solver.ee_improvement_tolerance = keys.positive(
            "ao_improvement_tolerance",
            defaults.ee_improvement_tolerance,
        )?;

        let workers = match keys.integer("workers")? {
            None => None,
            Some(i) if i >= 1 => Some(i as usize),
            Some(i) => return Err(range("workers", format!("must be at least 1, got {i}"))),
        };

        let config = Config {
            scenario,
            max_power_w,
            n_users,
            trials,
            master_seed,
            schemes,
            sweep_param: keys.string("sweep_param")?,
            sweep_values: keys.floats("sweep_values")?,
            solver,
            workers,
            user_x_m: keys.floats("user_x_m")?,
            user_y_m: keys.floats("user_y_m")?,
        };

        if let Some(key) = keys.table.keys().next() {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        config.solver.validate()?;
        Ok(config)
    }

    /// Experiment for the given preset, with config overrides applied.
    pub fn experiment_spec(&self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        let sweep = match kind.preset() {
            Some(preset) => {
                if let Some(param) = &self.sweep_param {
                    if param != preset.param_name() {
                        return Err(range(
                            "sweep_param",
                            format!(
                                "preset sweeps `{}`, config asks for `{param}`",
                                preset.param_name()
                            ),
                        ));
                    }
                }
                match &self.sweep_values {
                    Some(values) => Sweep::from_param(preset.param_name(), values.clone())?,
                    None => preset,
                }
            }
            None => {
                let param = self
                    .sweep_param
                    .as_deref()
                    .ok_or_else(|| ConfigError::Missing {
                        key: "sweep_param".into(),
                    })?;
                let values = self
                    .sweep_values
                    .clone()
                    .ok_or_else(|| ConfigError::Missing {
                        key: "sweep_values".into(),
                    })?;
                Sweep::from_param(param, values).map_err(|e| range("sweep_param", e.to_string()))?
            }
        };

        let spec = ExperimentSpec {
            sweep,
            trials: self.trials,
            base_scenario: self.scenario,
            max_power_w: self.max_power_w,
            n_users: self.n_users,
            schemes: self.schemes.clone(),
            master_seed: self.master_seed,
            solver: self.solver,
        };
        spec.validate()
            .map_err(|e| range("sweep_values", e.to_string()))?;
        Ok(spec)
    }

    /// Users supplied in the config, if any.
    pub fn explicit_users(&self) -> Result<Option<UserSet>> {
        match (&self.user_x_m, &self.user_y_m) {
            (None, None) => Ok(None),
            (Some(_), None) => Err(ConfigError::Missing {
                key: "user_y_m".into(),
            }),
            (None, Some(_)) => Err(ConfigError::Missing {
                key: "user_x_m".into(),
            }),
            (Some(xs), Some(ys)) => {
                if xs.len() != ys.len() {
                    return Err(range(
                        "user_y_m",
                        format!("has {} entries, user_x_m has {}", ys.len(), xs.len()),
                    ));
                }
                let positions = xs.iter().copied().zip(ys.iter().copied()).collect();
                let users = UserSet::with_uniform_cap(positions, self.max_power_w)
                    .map_err(|e| range("user_x_m", e.to_string()))?;
                users
                    .validate_in(&self.scenario)
                    .map_err(|e| range("user_x_m", e.to_string()))?;
                Ok(Some(users))
            }
        }
    }
}

/// Reads `path` and builds the experiment for `kind`.
pub fn parse_config(path: &Path, kind: ExperimentKind) -> Result<ExperimentSpec> {
    Config::from_path(path)?.experiment_spec(kind)
}
