//! TDMA baseline: every user owns an equal `1/N` share of the frame and
//! transmits without interference. Energy is accounted per frame, so the
//! transmit term of the consumed power is the time average `sum P_n / N`.

use crate::antenna::{pso_maximize, swarm_seeds};
use crate::ao::{alternate, AoConfig, LoopOutcome};
use crate::error::{Error, Result};
use crate::model::{
    log2_1p, AntennaPosition, ChannelGains, EESolution, PowerAllocation, Scenario, UserSet,
};
use crate::power::{clamp_power, stationary_power, DinkelbachConfig, PowerSolveResult};

/// Per-user TDMA rates `(1/N) log2(1 + P_n h_n / sigma^2)`.
pub fn tdma_rates(gains: &ChannelGains, alloc: &PowerAllocation, scenario: &Scenario) -> Vec<f64> {
    let share = 1.0 / gains.len() as f64;
    gains
        .gains()
        .iter()
        .zip(alloc.powers_w())
        .map(|(h, p)| share * log2_1p(p * h / scenario.noise_power_w))
        .collect()
}

pub fn tdma_sum_rate(gains: &ChannelGains, alloc: &PowerAllocation, scenario: &Scenario) -> f64 {
    tdma_rates(gains, alloc, scenario).iter().sum()
}

/// `P_f + sum P_n / N`.
pub fn tdma_total_power(alloc: &PowerAllocation, scenario: &Scenario) -> f64 {
    scenario.fixed_power_w + alloc.total_w() / alloc.len() as f64
}

pub fn tdma_energy_efficiency(
    gains: &ChannelGains,
    alloc: &PowerAllocation,
    scenario: &Scenario,
) -> f64 {
    tdma_sum_rate(gains, alloc, scenario) / tdma_total_power(alloc, scenario)
}

fn tdma_ratio(h: &[f64], p: &[f64], scenario: &Scenario) -> f64 {
    let share = 1.0 / h.len() as f64;
    let rate: f64 = h
        .iter()
        .zip(p)
        .map(|(h, p)| log2_1p(p * h / scenario.noise_power_w))
        .sum();
    share * rate / (scenario.fixed_power_w + share * p.iter().sum::<f64>())
}

/// Dinkelbach iterations for the TDMA power problem. The subtractive
/// subproblem separates per user, each with maximizer
/// `1/(beta ln 2) - sigma^2 / h_n` clamped to `[0, cap_n]`.
pub fn allocate_power_tdma(
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

    let mut powers = caps.to_vec();
    let mut beta = tdma_ratio(h, &powers, scenario);
    let mut trace = vec![beta];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let candidate: Vec<f64> = h
            .iter()
            .zip(caps)
            .map(|(&g, &cap)| clamp_power(stationary_power(g, 0.0, beta, scenario), cap))
            .collect();
        let next = tdma_ratio(h, &candidate, scenario);
        let step = next - beta;
        if step < 0.0 {
            converged = true;
            break;
        }
        powers = candidate;
        beta = next;
        trace.push(beta);
        if step < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let active_users = powers.iter().filter(|&&p| p > 0.0).count();
    Ok(PowerSolveResult {
        allocation: PowerAllocation::from_clamped(powers),
        ee: beta,
        active_users,
        iterations_per_user: vec![iterations],
        beta_traces: vec![trace],
        converged,
    })
}

/// Alternating TDMA solve: powers by [`allocate_power_tdma`], antenna by PSO
/// on the TDMA sum rate for the current powers.
pub fn tdma_solve(scenario: &Scenario, users: &UserSet, cfg: &AoConfig) -> Result<EESolution> {
    scenario.validate()?;
    users.validate_in(scenario)?;
    cfg.validate()?;

    let length = scenario.waveguide_length_m;
    let caps = users.power_caps_w();
    let start = crate::antenna::initialize_antenna(users, length);

    let allocate = |antenna: AntennaPosition| {
        let gains = ChannelGains::compute(users, antenna, scenario);
        allocate_power_tdma(&gains, caps, scenario, &cfg.dinkelbach)
    };
    let propose = |alloc: &PowerAllocation, incumbent: AntennaPosition, iteration: usize| {
        let rate_at = |x: f64| {
            let gains = ChannelGains::compute(users, AntennaPosition::clamped(x, length), scenario);
            tdma_sum_rate(&gains, alloc, scenario)
        };
        let seeds = swarm_seeds(users.positions(), length, Some(incumbent.x_m()));
        let pso = crate::antenna::PsoConfig {
            rng_seed: crate::streams::derive_seed(cfg.pso.rng_seed, iteration as u64),
            ..cfg.pso
        };
        let best = pso_maximize(rate_at, length, &seeds, &pso);
        Ok(AntennaPosition::clamped(best.x, length))
    };

    let LoopOutcome {
        antenna,
        power,
        trace,
        flagged,
    } = alternate(start, cfg, allocate, propose)?;

    let gains = ChannelGains::compute(users, antenna, scenario);
    let allocation = power.allocation;
    Ok(EESolution {
        antenna,
        sum_rate_bits_per_s_hz: tdma_sum_rate(&gains, &allocation, scenario),
        total_power_w: tdma_total_power(&allocation, scenario),
        ee_bits_per_joule: power.ee,
        allocation,
        trace,
        flagged,
    })
}
