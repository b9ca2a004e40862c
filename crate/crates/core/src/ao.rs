//! Alternating optimization of transmit powers and antenna position, plus the
//! baseline schemes it is compared against.
//!
//! Each outer iteration proposes a new antenna position for the current
//! powers, re-solves the powers there, and keeps the move only if the energy
//! efficiency strictly improves. The first rejected proposal ends the loop,
//! so the recorded trace never decreases.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::antenna::{
    exhaustive_search, initialize_antenna, pso_optimize, PositionObjective, PsoConfig,
};
use crate::error::{Error, Result};
use crate::model::{
    sum_rate_noma, AntennaPosition, ChannelGains, EESolution, PowerAllocation, Scenario,
    TracePoint, UserSet,
};
use crate::power::{allocate_power, DinkelbachConfig, PowerSolveResult};
use crate::streams::{derive_seed, stream_rng};
use crate::tdma;

/// Stream id used for the random initial antenna position.
const INIT_STREAM: u64 = u64::MAX;

/// Default grid resolution of the exhaustive position search, in meters.
pub const DEFAULT_GRID_STEP_M: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    NearestUser,
    /// Uniform on `[0, L]`, drawn from the solve's seed.
    Random,
    FixedAt(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoConfig {
    pub max_outer_iterations: usize,
    /// A proposed move is accepted only if it raises the energy efficiency
    /// by more than this fraction of the current value.
    pub ee_improvement_tolerance: f64,
    pub dinkelbach: DinkelbachConfig,
    /// `pso.rng_seed` is the root seed of the whole solve.
    pub pso: PsoConfig,
    pub init_mode: InitMode,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 20,
            ee_improvement_tolerance: 1e-8,
            dinkelbach: DinkelbachConfig::default(),
            pso: PsoConfig::default(),
            init_mode: InitMode::NearestUser,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_outer_iterations must be at least 1".into(),
            ));
        }
        if !(self.ee_improvement_tolerance.is_finite() && self.ee_improvement_tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ee_improvement_tolerance must be positive, got {}",
                self.ee_improvement_tolerance
            )));
        }
        self.dinkelbach.validate()?;
        self.pso.validate()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.pso.rng_seed = seed;
        self
    }

    /// PSO settings for outer iteration `iteration`.
    fn pso_for(&self, iteration: usize) -> PsoConfig {
        PsoConfig {
            rng_seed: derive_seed(self.pso.rng_seed, iteration as u64),
            ..self.pso
        }
    }

    fn initial_antenna(&self, scenario: &Scenario, users: &UserSet) -> Result<AntennaPosition> {
        let length = scenario.waveguide_length_m;
        match self.init_mode {
            InitMode::NearestUser => Ok(initialize_antenna(users, length)),
            InitMode::Random => {
                let x = stream_rng(self.pso.rng_seed, INIT_STREAM).gen_range(0.0..=length);
                Ok(AntennaPosition::clamped(x, length))
            }
            InitMode::FixedAt(x) => AntennaPosition::new(x, scenario),
        }
    }
}

/// The schemes compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeKind {
    /// Proposed: nearest-user start, PSO positioning.
    NomaPso,
    /// Grid search replaces PSO in the positioning step.
    NomaExhaustive { grid_step_m: f64 },
    /// PSO positioning from a uniformly random start.
    NomaRandomInit,
    /// Antenna pinned at `x = 0`, powers optimized once.
    NomaFixed,
    /// Equal time slots, no inter-user interference.
    Tdma,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::NomaPso,
        SchemeKind::NomaExhaustive {
            grid_step_m: DEFAULT_GRID_STEP_M,
        },
        SchemeKind::NomaRandomInit,
        SchemeKind::NomaFixed,
        SchemeKind::Tdma,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::NomaPso => "noma_pso",
            SchemeKind::NomaExhaustive { .. } => "noma_exhaustive",
            SchemeKind::NomaRandomInit => "noma_random",
            SchemeKind::NomaFixed => "noma_fixed",
            SchemeKind::Tdma => "tdma",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme `{s}`")))
    }
}

/// Final state of an outer loop.
pub(crate) struct LoopOutcome {
    pub antenna: AntennaPosition,
    pub power: PowerSolveResult,
    pub trace: Vec<TracePoint>,
    pub flagged: bool,
}

/// Generic alternating loop. `allocate` solves the powers at an antenna
/// position; `propose` suggests a position for the given powers, incumbent
/// position and outer iteration index.
pub(crate) fn alternate(
    start: AntennaPosition,
    cfg: &AoConfig,
    allocate: impl Fn(AntennaPosition) -> Result<PowerSolveResult>,
    propose: impl Fn(&PowerAllocation, AntennaPosition, usize) -> Result<AntennaPosition>,
) -> Result<LoopOutcome> {
    let mut antenna = start;
    let mut power = allocate(antenna)?;
    let mut flagged = !power.converged;
    let mut trace = vec![TracePoint {
        iteration: 0,
        ee: power.ee,
    }];
    let mut settled = false;

    for iteration in 1..=cfg.max_outer_iterations {
        let candidate = propose(&power.allocation, antenna, iteration)?;
        let resolved = allocate(candidate)?;
        if resolved.ee > power.ee + cfg.ee_improvement_tolerance * power.ee.abs() {
            antenna = candidate;
            flagged |= !resolved.converged;
            power = resolved;
            trace.push(TracePoint {
                iteration,
                ee: power.ee,
            });
        } else {
            settled = true;
            break;
        }
    }

    Ok(LoopOutcome {
        antenna,
        power,
        trace,
        flagged: flagged || !settled,
    })
}

fn validate_inputs(scenario: &Scenario, users: &UserSet, cfg: &AoConfig) -> Result<()> {
    scenario.validate()?;
    users.validate_in(scenario)?;
    cfg.validate()
}

#[derive(Debug, Clone, Copy)]
enum PositionSearch {
    Pso,
    Exhaustive(f64),
}

fn noma_solution(scenario: &Scenario, users: &UserSet, outcome: LoopOutcome) -> EESolution {
    let gains = ChannelGains::compute(users, outcome.antenna, scenario);
    let allocation = outcome.power.allocation;
    EESolution {
        antenna: outcome.antenna,
        sum_rate_bits_per_s_hz: sum_rate_noma(&gains, &allocation, scenario),
        total_power_w: scenario.fixed_power_w + allocation.total_w(),
        ee_bits_per_joule: outcome.power.ee,
        allocation,
        trace: outcome.trace,
        flagged: outcome.flagged,
    }
}

fn noma_loop(
    scenario: &Scenario,
    users: &UserSet,
    cfg: &AoConfig,
    search: PositionSearch,
) -> Result<EESolution> {
    validate_inputs(scenario, users, cfg)?;
    let length = scenario.waveguide_length_m;
    let caps = users.power_caps_w();
    let start = cfg.initial_antenna(scenario, users)?;

    let allocate = |antenna: AntennaPosition| {
        let gains = ChannelGains::compute(users, antenna, scenario);
        allocate_power(&gains, caps, scenario, &cfg.dinkelbach)
    };
    let propose = |alloc: &PowerAllocation, incumbent: AntennaPosition, iteration: usize| {
        let obj = PositionObjective::new(users, alloc, scenario)?;
        let x = match search {
            PositionSearch::Pso => {
                pso_optimize(&obj, length, &cfg.pso_for(iteration), Some(incumbent.x_m())).x
            }
            PositionSearch::Exhaustive(step) => exhaustive_search(&obj, length, step).x,
        };
        Ok(AntennaPosition::clamped(x, length))
    };

    let outcome = alternate(start, cfg, allocate, propose)?;
    Ok(noma_solution(scenario, users, outcome))
}

/// Alternating power/position optimization with PSO positioning, started
/// according to `cfg.init_mode`.
pub fn alternating_optimize(
    scenario: &Scenario,
    users: &UserSet,
    cfg: &AoConfig,
) -> Result<EESolution> {
    noma_loop(scenario, users, cfg, PositionSearch::Pso)
}

/// Solves one instance with the given scheme.
pub fn solve_scheme(
    kind: SchemeKind,
    scenario: &Scenario,
    users: &UserSet,
    cfg: &AoConfig,
) -> Result<EESolution> {
    match kind {
        SchemeKind::NomaPso => {
            let cfg = AoConfig {
                init_mode: InitMode::NearestUser,
                ..*cfg
            };
            noma_loop(scenario, users, &cfg, PositionSearch::Pso)
        }
        SchemeKind::NomaRandomInit => {
            let cfg = AoConfig {
                init_mode: InitMode::Random,
                ..*cfg
            };
            noma_loop(scenario, users, &cfg, PositionSearch::Pso)
        }
        SchemeKind::NomaExhaustive { grid_step_m } => {
            if !(grid_step_m > 0.0 && grid_step_m <= scenario.waveguide_length_m) {
                return Err(Error::InvalidConfig(format!(
                    "exhaustive grid step must lie in (0, L], got {grid_step_m}"
                )));
            }
            let cfg = AoConfig {
                init_mode: InitMode::NearestUser,
                ..*cfg
            };
            noma_loop(
                scenario,
                users,
                &cfg,
                PositionSearch::Exhaustive(grid_step_m),
            )
        }
        SchemeKind::NomaFixed => solve_fixed(scenario, users, cfg),
        SchemeKind::Tdma => {
            let cfg = AoConfig {
                init_mode: InitMode::NearestUser,
                ..*cfg
            };
            tdma::tdma_solve(scenario, users, &cfg)
        }
    }
}

fn solve_fixed(scenario: &Scenario, users: &UserSet, cfg: &AoConfig) -> Result<EESolution> {
    validate_inputs(scenario, users, cfg)?;
    let antenna = AntennaPosition::clamped(0.0, scenario.waveguide_length_m);
    let gains = ChannelGains::compute(users, antenna, scenario);
    let power = allocate_power(&gains, users.power_caps_w(), scenario, &cfg.dinkelbach)?;
    let flagged = !power.converged;
    let outcome = LoopOutcome {
        antenna,
        trace: vec![TracePoint {
            iteration: 0,
            ee: power.ee,
        }],
        power,
        flagged,
    };
    Ok(noma_solution(scenario, users, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::energy_efficiency;
    use crate::power::dinkelbach_user;

    fn users(xy: &[(f64, f64)]) -> UserSet {
        UserSet::with_uniform_cap(xy.to_vec(), 0.01).unwrap()
    }

    #[test]
    fn single_reachable_user() {
        let s = Scenario::evaluation_defaults();
        let u = users(&[(47.0, 4.0)]);
        let cfg = AoConfig::default().with_seed(3);
        let sol = alternating_optimize(&s, &u, &cfg).unwrap();
        assert_eq!(sol.antenna.x_m(), 47.0);
        assert!(sol.trace.len() <= 2);
        let h = crate::model::channel_gain((47.0, 4.0), sol.antenna, &s);
        let single = dinkelbach_user(0, &[h], &[0.01], &s, &cfg.dinkelbach);
        assert_eq!(sol.allocation.powers_w(), &[single.power]);
        assert_eq!(sol.ee_bits_per_joule, single.beta);
        assert!(!sol.flagged);
    }

    #[test]
    fn solution_figures_are_consistent() {
        let s = Scenario::evaluation_defaults();
        let u = users(&[(12.0, -3.0), (64.0, 8.0), (99.0, 1.0), (30.0, 0.0)]);
        let sol = solve_scheme(SchemeKind::NomaPso, &s, &u, &AoConfig::default()).unwrap();
        let ratio = sol.sum_rate_bits_per_s_hz / sol.total_power_w;
        assert!((sol.ee_bits_per_joule - ratio).abs() <= 1e-12 * ratio);
        let gains = ChannelGains::compute(&u, sol.antenna, &s);
        let ee = energy_efficiency(&gains, &sol.allocation, &s);
        assert!((ee - sol.ee_bits_per_joule).abs() <= 1e-12 * ee);
        assert_eq!(sol.trace.last().unwrap().ee, sol.ee_bits_per_joule);
    }

    #[test]
    fn optimal_start_stops_after_one_proposal() {
        let s = Scenario::evaluation_defaults();
        let u = users(&[(20.0, 2.0), (80.0, 6.0)]);
        let exhaustive = solve_scheme(
            SchemeKind::NomaExhaustive { grid_step_m: 0.01 },
            &s,
            &u,
            &AoConfig::default(),
        )
        .unwrap();
        let cfg = AoConfig {
            init_mode: InitMode::FixedAt(exhaustive.antenna.x_m()),
            ..Default::default()
        };
        let sol = alternating_optimize(&s, &u, &cfg).unwrap();
        assert_eq!(sol.trace.len(), 1);
        assert_eq!(sol.antenna, exhaustive.antenna);
        assert_eq!(sol.ee_bits_per_joule, exhaustive.ee_bits_per_joule);
    }

    #[test]
    fn fixed_scheme_pins_antenna_at_origin() {
        let s = Scenario::evaluation_defaults();
        let u = users(&[(20.0, 2.0), (80.0, 6.0)]);
        let cfg = AoConfig::default();
        let fixed = solve_scheme(SchemeKind::NomaFixed, &s, &u, &cfg).unwrap();
        assert_eq!(fixed.antenna.x_m(), 0.0);
        let ex = solve_scheme(SchemeKind::ALL[1], &s, &u, &cfg).unwrap();
        assert!(ex.ee_bits_per_joule >= fixed.ee_bits_per_joule);
    }

    #[test]
    fn random_init_depends_on_seed_only() {
        let s = Scenario::evaluation_defaults();
        let u = users(&[(20.0, 2.0), (80.0, 6.0), (81.0, -6.0)]);
        let cfg = AoConfig::default().with_seed(11);
        let a = solve_scheme(SchemeKind::NomaRandomInit, &s, &u, &cfg).unwrap();
        let b = solve_scheme(SchemeKind::NomaRandomInit, &s, &u, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scheme_names_round_trip() {
        for kind in SchemeKind::ALL {
            assert_eq!(kind.name().parse::<SchemeKind>().unwrap(), kind);
        }
        assert!("noma".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn rejects_users_outside_area() {
        let s = Scenario::evaluation_defaults();
        let u = users(&[(20.0, 11.0)]);
        assert!(matches!(
            alternating_optimize(&s, &u, &AoConfig::default()),
            Err(Error::UserOutOfArea { .. })
        ));
    }

    #[test]
    fn outer_cap_flags_solution() {
        let s = Scenario::evaluation_defaults();
        let u = users(&[(20.0, 2.0), (80.0, 6.0)]);
        // start far away so the first proposal is accepted, then run out
        let cfg = AoConfig {
            max_outer_iterations: 1,
            init_mode: InitMode::FixedAt(120.0),
            ..Default::default()
        };
        let sol = alternating_optimize(&s, &u, &cfg).unwrap();
        assert_eq!(sol.trace.len(), 2);
        assert!(sol.flagged);
    }
}
