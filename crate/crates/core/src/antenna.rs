//! Antenna placement along the waveguide for fixed transmit powers.
//!
//! With powers fixed the total consumed power is constant, so maximizing the
//! energy efficiency over the antenna position is the same as maximizing
//!
//! ```text
//!   f(x) = sum_n P_n / ((x - x_n)^2 + y_n^2 + d^2),   0 <= x <= L
//! ```
//!
//! a sum of bell-shaped bumps centred at the user abscissas. The sum can be
//! multimodal, so it is searched by a particle swarm; a fine grid search is
//! kept as the reference optimizer.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{AntennaPosition, PowerAllocation, Scenario, UserSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia_weight: f64,
    pub cognitive_coeff: f64,
    pub social_coeff: f64,
    /// Velocity limit as a fraction of the waveguide length.
    pub velocity_clamp_fraction: f64,
    /// Relative improvement of the global best below which an iteration
    /// counts as stalled.
    pub stall_tolerance: f64,
    pub stall_iterations: usize,
    pub rng_seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            max_iterations: 200,
            inertia_weight: 0.729,
            cognitive_coeff: 1.49445,
            social_coeff: 1.49445,
            velocity_clamp_fraction: 0.2,
            stall_tolerance: 1e-8,
            stall_iterations: 20,
            rng_seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.swarm_size < 2 {
            return bad(format!(
                "pso swarm_size must be >= 2, got {}",
                self.swarm_size
            ));
        }
        if self.max_iterations == 0 {
            return bad("pso max_iterations must be >= 1".into());
        }
        for (name, v) in [
            ("inertia_weight", self.inertia_weight),
            ("cognitive_coeff", self.cognitive_coeff),
            ("social_coeff", self.social_coeff),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("pso {name} must be non-negative, got {v}"));
            }
        }
        if !(self.velocity_clamp_fraction > 0.0 && self.velocity_clamp_fraction <= 1.0) {
            return bad(format!(
                "pso velocity_clamp_fraction must lie in (0, 1], got {}",
                self.velocity_clamp_fraction
            ));
        }
        if !(self.stall_tolerance.is_finite() && self.stall_tolerance > 0.0) {
            return bad(format!(
                "pso stall_tolerance must be positive, got {}",
                self.stall_tolerance
            ));
        }
        if self.stall_iterations == 0 {
            return bad("pso stall_iterations must be >= 1".into());
        }
        Ok(())
    }
}

/// Data of the positioning objective: user coordinates, their powers and the
/// squared antenna height.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionObjective {
    pub user_xy: Vec<(f64, f64)>,
    pub powers_w: Vec<f64>,
    pub height_sq_m2: f64,
}

impl PositionObjective {
    pub fn new(users: &UserSet, alloc: &PowerAllocation, scenario: &Scenario) -> Result<Self> {
        if alloc.len() != users.len() {
            return Err(Error::LengthMismatch {
                what: "powers_w",
                expected: users.len(),
                got: alloc.len(),
            });
        }
        Ok(Self {
            user_xy: users.positions().to_vec(),
            powers_w: alloc.powers_w().to_vec(),
            height_sq_m2: scenario.height_sq(),
        })
    }

    pub fn is_flat(&self) -> bool {
        self.powers_w.iter().all(|&p| p == 0.0)
    }

    pub fn value(&self, x: f64) -> f64 {
        antenna_objective(x, self)
    }
}

pub fn antenna_objective(x: f64, obj: &PositionObjective) -> f64 {
    obj.user_xy
        .iter()
        .zip(&obj.powers_w)
        .map(|(&(ux, uy), &p)| {
            let dx = x - ux;
            p / (dx * dx + uy * uy + obj.height_sq_m2)
        })
        .sum()
}

/// Best point found by a position search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome {
    pub x: f64,
    pub value: f64,
}

/// Maximizes `f` over the grid `{0, step, 2 step, ..., L}`; `L` is always
/// evaluated. Ties go to the smaller abscissa.
pub fn grid_maximize(f: impl Fn(f64) -> f64, length: f64, step: f64) -> SearchOutcome {
    assert!(step > 0.0 && length >= 0.0);
    let last = (length / step + 1e-9).floor() as u64;
    let mut best = SearchOutcome {
        x: 0.0,
        value: f(0.0),
    };
    for k in 1..=last {
        let x = (k as f64 * step).min(length);
        let v = f(x);
        if v > best.value {
            best = SearchOutcome { x, value: v };
        }
    }
    if (last as f64) * step < length {
        let v = f(length);
        if v > best.value {
            best = SearchOutcome {
                x: length,
                value: v,
            };
        }
    }
    best
}

/// Exhaustive grid search of the positioning objective.
pub fn exhaustive_search(obj: &PositionObjective, length: f64, grid_step_m: f64) -> SearchOutcome {
    grid_maximize(|x| antenna_objective(x, obj), length, grid_step_m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    /// Global-best value after initialization and after every iteration.
    pub history: Vec<f64>,
}

/// Global-best particle swarm maximization of `f` on `[0, length]`.
///
/// The first particles start at `seeds` (clamped into the interval, at most
/// `swarm_size` of them); the rest start uniformly at random. A particle that
/// leaves the interval is put back on the boundary and loses its velocity.
pub fn pso_maximize(
    f: impl Fn(f64) -> f64,
    length: f64,
    seeds: &[f64],
    cfg: &PsoConfig,
) -> PsoOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let n = cfg.swarm_size;
    let v_max = cfg.velocity_clamp_fraction * length;

    let mut x: Vec<f64> = seeds.iter().take(n).map(|s| s.clamp(0.0, length)).collect();
    while x.len() < n {
        x.push(rng.gen_range(0.0..=length));
    }
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-v_max..=v_max)).collect();
    let mut best_x = x.clone();
    let mut best_val: Vec<f64> = x.iter().map(|&xi| f(xi)).collect();

    let mut g = 0;
    for i in 1..n {
        if best_val[i] > best_val[g] {
            g = i;
        }
    }
    let mut g_x = best_x[g];
    let mut g_val = best_val[g];
    let mut history = vec![g_val];
    let mut stalled = 0;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        for i in 0..n {
            let r1: f64 = rng.gen();
            let r2: f64 = rng.gen();
            let vel = cfg.inertia_weight * v[i]
                + cfg.cognitive_coeff * r1 * (best_x[i] - x[i])
                + cfg.social_coeff * r2 * (g_x - x[i]);
            v[i] = vel.clamp(-v_max, v_max);
            x[i] += v[i];
            if x[i] < 0.0 {
                x[i] = 0.0;
                v[i] = 0.0;
            } else if x[i] > length {
                x[i] = length;
                v[i] = 0.0;
            }
            let val = f(x[i]);
            if val > best_val[i] {
                best_val[i] = val;
                best_x[i] = x[i];
            }
        }

        let previous = g_val;
        for i in 0..n {
            if best_val[i] > g_val {
                g_val = best_val[i];
                g_x = best_x[i];
            }
        }
        history.push(g_val);

        if g_val - previous <= cfg.stall_tolerance * previous.abs() {
            stalled += 1;
            if stalled >= cfg.stall_iterations {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    PsoOutcome {
        x: g_x,
        value: g_val,
        iterations,
        history,
    }
}

/// PSO on the positioning objective. Particles are seeded at the incumbent
/// position (if any) and at each user's projection onto the waveguide.
///
/// With all powers zero every position is optimal; the incumbent (or `0`) is
/// returned untouched.
pub fn pso_optimize(
    obj: &PositionObjective,
    length: f64,
    cfg: &PsoConfig,
    incumbent: Option<f64>,
) -> PsoOutcome {
    if obj.is_flat() {
        let x = incumbent.unwrap_or(0.0).clamp(0.0, length);
        return PsoOutcome {
            x,
            value: 0.0,
            iterations: 0,
            history: vec![0.0],
        };
    }
    let seeds = swarm_seeds(&obj.user_xy, length, incumbent);
    pso_maximize(|x| antenna_objective(x, obj), length, &seeds, cfg)
}

/// Seed abscissas for a swarm: the incumbent first, then user projections.
pub fn swarm_seeds(user_xy: &[(f64, f64)], length: f64, incumbent: Option<f64>) -> Vec<f64> {
    incumbent
        .into_iter()
        .chain(user_xy.iter().map(|&(x, _)| x.clamp(0.0, length)))
        .collect()
}

/// Places the antenna as close as possible to the nearest user: each user's
/// best reachable point is `min(L, x_n)`, and the candidate with the smallest
/// residual distance wins (ties to the lower user index).
pub fn initialize_antenna(users: &UserSet, length: f64) -> AntennaPosition {
    let mut best: Option<(f64, f64)> = None;
    for &(x, y) in users.positions() {
        let candidate = x.min(length);
        let d = (candidate - x).powi(2) + y * y;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((candidate, d));
        }
    }
    let (x, _) = best.expect("user set is never empty");
    AntennaPosition::clamped(x, length)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(users: &[(f64, f64)], powers: &[f64]) -> PositionObjective {
        PositionObjective {
            user_xy: users.to_vec(),
            powers_w: powers.to_vec(),
            height_sq_m2: 9.0,
        }
    }

    #[test]
    fn single_bell_peaks_at_user() {
        let obj = objective(&[(50.0, 2.0)], &[0.3]);
        let peak = antenna_objective(50.0, &obj);
        assert!((peak - 0.3 / 13.0).abs() < 1e-15);
        assert!(antenna_objective(49.0, &obj) < peak);
        assert!(antenna_objective(51.0, &obj) < peak);
    }

    #[test]
    fn mirror_symmetry() {
        let obj = objective(&[(40.0, 3.0), (80.0, -3.0)], &[0.01, 0.01]);
        for dx in [0.5, 3.0, 17.0, 40.0] {
            let l = antenna_objective(60.0 - dx, &obj);
            let r = antenna_objective(60.0 + dx, &obj);
            assert!((l - r).abs() <= 1e-15 * l);
        }
    }

    #[test]
    fn probe_points_match_hand_evaluation() {
        let users = [(10.0, 1.0), (55.5, -4.0), (100.0, 9.5)];
        let powers = [0.002, 0.01, 0.0];
        let obj = objective(&users, &powers);
        for x in [0.0, 10.0, 33.3, 55.5, 120.0] {
            let by_hand = 0.002 / ((x - 10.0) * (x - 10.0) + 1.0 + 9.0)
                + 0.01 / ((x - 55.5) * (x - 55.5) + 16.0 + 9.0);
            assert!((antenna_objective(x, &obj) - by_hand).abs() <= 1e-15 * by_hand);
        }
    }

    #[test]
    fn grid_includes_length_and_breaks_ties_low() {
        let r = grid_maximize(|x| x, 1.05, 0.1);
        assert_eq!(r.x, 1.05);
        let flat = objective(&[(5.0, 0.0)], &[0.0]);
        let r = exhaustive_search(&flat, 120.0, 0.01);
        assert_eq!(r.x, 0.0);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn exhaustive_single_peak() {
        let obj = objective(&[(50.0, 4.0)], &[0.01]);
        let r = exhaustive_search(&obj, 120.0, 0.01);
        assert!((r.x - 50.0).abs() <= 0.005 + 1e-9);
    }

    #[test]
    fn pso_single_user_converges_to_projection() {
        let cfg = PsoConfig::default();
        for (ux, expected) in [(37.2, 37.2), (130.0, 120.0)] {
            let obj = objective(&[(ux, 6.0)], &[0.01]);
            let r = pso_optimize(&obj, 120.0, &cfg, None);
            assert!((r.x - expected).abs() < 1e-3, "{} vs {}", r.x, expected);
        }
    }

    #[test]
    fn pso_unseeded_still_finds_single_peak() {
        let obj = objective(&[(73.4, 2.0)], &[0.01]);
        for seed in 0..5 {
            let cfg = PsoConfig {
                rng_seed: seed,
                ..Default::default()
            };
            let r = pso_maximize(|x| antenna_objective(x, &obj), 120.0, &[], &cfg);
            assert!((r.x - 73.4).abs() < 1e-2, "{}", r.x);
        }
    }

    #[test]
    fn pso_bookkeeping_and_monotone_history() {
        let obj = objective(
            &[(10.0, 1.0), (60.0, 9.0), (61.0, 8.0), (110.0, 0.5)],
            &[0.004, 0.01, 0.01, 0.001],
        );
        let r = pso_optimize(&obj, 120.0, &PsoConfig::default(), Some(33.0));
        assert_eq!(r.value, antenna_objective(r.x, &obj));
        assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
        assert!((0.0..=120.0).contains(&r.x));
    }

    #[test]
    fn pso_is_deterministic_per_seed() {
        let obj = objective(
            &[(10.0, 1.0), (60.0, 9.0), (110.0, 0.5)],
            &[0.004, 0.01, 0.001],
        );
        let cfg = PsoConfig {
            rng_seed: 42,
            ..Default::default()
        };
        let a = pso_optimize(&obj, 120.0, &cfg, None);
        let b = pso_optimize(&obj, 120.0, &cfg, None);
        assert_eq!(a, b);
        assert_eq!(a.x.to_bits(), b.x.to_bits());
    }

    #[test]
    fn flat_objective_keeps_incumbent() {
        let obj = objective(&[(10.0, 1.0), (60.0, 9.0)], &[0.0, 0.0]);
        let r = pso_optimize(&obj, 120.0, &PsoConfig::default(), Some(42.5));
        assert_eq!(r.x, 42.5);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn nearest_user_initialization() {
        let users = UserSet::with_uniform_cap(vec![(50.0, 2.0), (90.0, 8.0)], 0.01).unwrap();
        assert_eq!(initialize_antenna(&users, 120.0).x_m(), 50.0);
        let beyond = UserSet::with_uniform_cap(vec![(130.0, 1.0)], 0.01).unwrap();
        assert_eq!(initialize_antenna(&beyond, 120.0).x_m(), 120.0);
        let tie = UserSet::with_uniform_cap(vec![(20.0, -3.0), (70.0, 3.0)], 0.01).unwrap();
        assert_eq!(initialize_antenna(&tie, 120.0).x_m(), 20.0);
    }

    #[test]
    fn config_validation() {
        assert!(PsoConfig::default().validate().is_ok());
        let bad = PsoConfig {
            swarm_size: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PsoConfig {
            velocity_clamp_fraction: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
