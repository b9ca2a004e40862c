//! Energy-efficient power allocation for a fixed antenna position.
//!
//! Users are served in descending gain order. A user only transmits if every
//! stronger user already sits at its cap, so the problem collapses into a
//! chain of scalar fractional programs: for user `n`, maximize
//!
//! ```text
//!   log2(1 + (A_n + P h_n) / sigma^2) / (B_n + P + P_f),   0 <= P <= cap_n
//! ```
//!
//! with `A_n = sum_{i<n} cap_i h_i` and `B_n = sum_{i<n} cap_i`. Each scalar
//! problem is solved by Dinkelbach iterations whose subtractive subproblem has
//! the closed-form maximizer [`stationary_power`] clamped to the box. The chain
//! stops at the first user that does not saturate; everyone weaker gets zero.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{descending_order, log2_1p, ChannelGains, PowerAllocation, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachConfig {
    /// Stop once `beta_l - beta_{l-1}` drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start user `n` from the converged ratio of user `n - 1` instead of the
    /// all-caps ratio.
    pub warm_start: bool,
}

impl Default for DinkelbachConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 100,
            warm_start: false,
        }
    }
}

impl DinkelbachConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dinkelbach tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "dinkelbach max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Power that zeroes the derivative of the subtractive objective
/// `log2(1 + (prefix + P h)/sigma^2) - beta (P + ...)`.
///
/// The result is unconstrained: it may be negative or exceed the cap.
pub fn stationary_power(
    gain: f64,
    prefix_weighted_power: f64,
    beta: f64,
    scenario: &Scenario,
) -> f64 {
    1.0 / (beta * LN_2) - (prefix_weighted_power + scenario.noise_power_w) / gain
}

/// Projects an unconstrained power onto `[0, cap]`.
pub fn clamp_power(p_der: f64, cap: f64) -> f64 {
    if p_der < 0.0 {
        0.0
    } else if p_der > cap {
        cap
    } else {
        p_der
    }
}

/// Outcome of the Dinkelbach loop for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSolve {
    pub power: f64,
    /// Final ratio, equal to the energy efficiency at `power`.
    pub beta: f64,
    /// Number of ratio updates performed.
    pub iterations: usize,
    /// False when `max_iterations` was hit before the tolerance was met.
    /// `power` and `beta` then hold the best iterate found.
    pub converged: bool,
    /// `beta_0, beta_1, ...`, non-decreasing.
    pub beta_trace: Vec<f64>,
}

/// The scalar fractional program of one user in the chain.
#[derive(Debug, Clone, Copy)]
struct ChainStep {
    /// `sum_{i<n} cap_i h_i`
    prefix_weighted: f64,
    /// `sum_{i<n} cap_i`
    prefix_power: f64,
    gain: f64,
    cap: f64,
}

impl ChainStep {
    fn ratio(&self, power: f64, scenario: &Scenario) -> f64 {
        log2_1p((self.prefix_weighted + power * self.gain) / scenario.noise_power_w)
            / (self.prefix_power + power + scenario.fixed_power_w)
    }

    fn solve(
        &self,
        scenario: &Scenario,
        cfg: &DinkelbachConfig,
        start: Option<(f64, f64)>,
    ) -> UserSolve {
        // (power, ratio) of the starting point; by default the all-caps point.
        let (mut power, mut beta) = start.unwrap_or((self.cap, self.ratio(self.cap, scenario)));
        let mut beta_trace = vec![beta];
        let mut converged = false;
        let mut iterations = 0;

        while iterations < cfg.max_iterations {
            let candidate = clamp_power(
                stationary_power(self.gain, self.prefix_weighted, beta, scenario),
                self.cap,
            );
            let next = self.ratio(candidate, scenario);
            iterations += 1;
            let step = next - beta;
            if step < 0.0 {
                // Only rounding can push the ratio down at the fixed point;
                // keep the incumbent.
                converged = true;
                break;
            }
            power = candidate;
            beta = next;
            beta_trace.push(beta);
            if step < cfg.tolerance {
                converged = true;
                break;
            }
        }

        UserSolve {
            power,
            beta,
            iterations,
            converged,
            beta_trace,
        }
    }
}

/// Dinkelbach iterations for the user at position `n` (0-based) of the
/// descending-gain order, with every stronger user pinned at its cap and
/// every weaker user silent.
pub fn dinkelbach_user(
    n: usize,
    sorted_gains: &[f64],
    sorted_caps: &[f64],
    scenario: &Scenario,
    cfg: &DinkelbachConfig,
) -> UserSolve {
    let step = chain_step(n, sorted_gains, sorted_caps);
    step.solve(scenario, cfg, None)
}

fn chain_step(n: usize, sorted_gains: &[f64], sorted_caps: &[f64]) -> ChainStep {
    let prefix_weighted = sorted_gains[..n]
        .iter()
        .zip(&sorted_caps[..n])
        .map(|(h, c)| h * c)
        .sum();
    let prefix_power = sorted_caps[..n].iter().sum();
    ChainStep {
        prefix_weighted,
        prefix_power,
        gain: sorted_gains[n],
        cap: sorted_caps[n],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolveResult {
    /// Powers in the original user order.
    pub allocation: PowerAllocation,
    /// Final Dinkelbach ratio, the energy efficiency of `allocation`.
    pub ee: f64,
    pub active_users: usize,
    /// Iterations spent per processed user, in descending-gain order.
    pub iterations_per_user: Vec<usize>,
    pub beta_traces: Vec<Vec<f64>>,
    pub converged: bool,
}

/// Optimal energy-efficient power allocation for fixed channel gains.
pub fn allocate_power(
    gains: &ChannelGains,
    caps: &[f64],
    scenario: &Scenario,
    cfg: &DinkelbachConfig,
) -> Result<PowerSolveResult> {
    let h = gains.gains();
    if caps.len() != h.len() {
        return Err(Error::LengthMismatch {
            what: "caps",
            expected: h.len(),
            got: caps.len(),
        });
    }
    if h.is_empty() {
        return Err(Error::NoUsers);
    }

    let order = descending_order(h);
    let sorted_gains: Vec<f64> = order.iter().map(|&i| h[i]).collect();
    let sorted_caps: Vec<f64> = order.iter().map(|&i| caps[i]).collect();

    let mut powers = vec![0.0; h.len()];
    let mut ee = 0.0;
    let mut iterations_per_user = Vec::new();
    let mut beta_traces = Vec::new();
    let mut converged = true;

    for (k, &user) in order.iter().enumerate() {
        let step = chain_step(k, &sorted_gains, &sorted_caps);
        // Warm start from the previous user's optimum, which is the point
        // P_n = 0 of this user's problem.
        let start = (cfg.warm_start && k > 0).then_some((0.0, ee));
        let solve = step.solve(scenario, cfg, start);

        powers[user] = solve.power;
        ee = solve.beta;
        converged &= solve.converged;
        iterations_per_user.push(solve.iterations);
        beta_traces.push(solve.beta_trace);

        if solve.power < step.cap {
            break;
        }
    }

    let active_users = powers.iter().filter(|&&p| p > 0.0).count();
    Ok(PowerSolveResult {
        allocation: PowerAllocation::from_clamped(powers),
        ee,
        active_users,
        iterations_per_user,
        beta_traces,
        converged,
    })
}
