//! Physical model of the uplink: scenario geometry, users, the free-space
//! line-of-sight channel between each user and the pinching antenna, and the
//! NOMA rate / energy-efficiency formulas every solver consumes.
//!
//! Everything is computed in linear watts and rates in bits/s/Hz. Conversion
//! from dBm / GHz happens once, at the configuration boundary.

use std::cmp::Ordering;
use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

/// Converts a power level in watts to dBm.
pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * p_w.log10() + 30.0
}

/// System-wide physical parameters. Immutable once validated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub carrier_frequency_hz: f64,
    pub wave_speed_m_per_s: f64,
    /// Height of the waveguide above the user plane.
    pub antenna_height_m: f64,
    pub waveguide_length_m: f64,
    /// Service area extent along the waveguide, users have `0 <= x <= area_x_m`.
    pub area_x_m: f64,
    /// Service area extent across the waveguide, users have `|y| <= area_y_m / 2`.
    pub area_y_m: f64,
    pub noise_power_w: f64,
    /// Aggregate fixed circuit power.
    pub fixed_power_w: f64,
}

impl Scenario {
    /// Default evaluation setting: 28 GHz, d = 3 m, 120 m x 20 m area with a
    /// waveguide spanning it, -90 dBm noise, 10 dBm fixed power.
    pub fn evaluation_defaults() -> Self {
        Self {
            carrier_frequency_hz: 28e9,
            wave_speed_m_per_s: SPEED_OF_LIGHT_M_PER_S,
            antenna_height_m: 3.0,
            waveguide_length_m: 120.0,
            area_x_m: 120.0,
            area_y_m: 20.0,
            noise_power_w: dbm_to_watts(-90.0),
            fixed_power_w: dbm_to_watts(10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("wave_speed_m_per_s", self.wave_speed_m_per_s),
            ("antenna_height_m", self.antenna_height_m),
            ("waveguide_length_m", self.waveguide_length_m),
            ("area_x_m", self.area_x_m),
            ("area_y_m", self.area_y_m),
            ("noise_power_w", self.noise_power_w),
            ("fixed_power_w", self.fixed_power_w),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidScenario { field, value });
            }
        }
        Ok(())
    }

    /// The distance-independent factor `c^2 / (16 pi^2 f_c^2)` of the free-space gain.
    pub fn path_gain_constant(&self) -> f64 {
        let c = self.wave_speed_m_per_s;
        let f = self.carrier_frequency_hz;
        c * c / (16.0 * PI * PI * f * f)
    }

    pub fn height_sq(&self) -> f64 {
        self.antenna_height_m * self.antenna_height_m
    }
}

/// Ground-plane coordinates of the users and their individual power caps.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    positions: Vec<(f64, f64)>,
    power_caps_w: Vec<f64>,
}

impl UserSet {
    pub fn new(positions: Vec<(f64, f64)>, power_caps_w: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::NoUsers);
        }
        if power_caps_w.len() != positions.len() {
            return Err(Error::LengthMismatch {
                what: "power_caps_w",
                expected: positions.len(),
                got: power_caps_w.len(),
            });
        }
        for (index, &(x, y)) in positions.iter().enumerate() {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::UserOutOfArea { index, x, y });
            }
        }
        for (index, &value) in power_caps_w.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidPowerCap { index, value });
            }
        }
        Ok(Self {
            positions,
            power_caps_w,
        })
    }

    /// Same cap for every user.
    pub fn with_uniform_cap(positions: Vec<(f64, f64)>, cap_w: f64) -> Result<Self> {
        let caps = vec![cap_w; positions.len()];
        Self::new(positions, caps)
    }

    /// Rejects users outside `[0, D_x] x [-D_y/2, D_y/2]`.
    pub fn validate_in(&self, scenario: &Scenario) -> Result<()> {
        let half_y = scenario.area_y_m / 2.0;
        for (index, &(x, y)) in self.positions.iter().enumerate() {
            if !(0.0..=scenario.area_x_m).contains(&x) || !(-half_y..=half_y).contains(&y) {
                return Err(Error::UserOutOfArea { index, x, y });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn power_caps_w(&self) -> &[f64] {
        &self.power_caps_w
    }
}

/// Position of the pinching antenna along the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AntennaPosition(f64);

impl AntennaPosition {
    pub fn new(x_m: f64, scenario: &Scenario) -> Result<Self> {
        let length = scenario.waveguide_length_m;
        if !(x_m.is_finite() && (0.0..=length).contains(&x_m)) {
            return Err(Error::AntennaOutOfRange { x: x_m, length });
        }
        Ok(Self(x_m))
    }

    /// Projects `x_m` onto `[0, length]`.
    pub fn clamped(x_m: f64, length: f64) -> Self {
        Self(x_m.clamp(0.0, length))
    }

    pub fn x_m(self) -> f64 {
        self.0
    }
}

/// Per-user transmit powers, indexed like the owning [`UserSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    powers_w: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(powers_w: Vec<f64>, users: &UserSet) -> Result<Self> {
        if powers_w.len() != users.len() {
            return Err(Error::LengthMismatch {
                what: "powers_w",
                expected: users.len(),
                got: powers_w.len(),
            });
        }
        for (index, (&value, &cap)) in powers_w.iter().zip(users.power_caps_w()).enumerate() {
            if !(value.is_finite() && (0.0..=cap).contains(&value)) {
                return Err(Error::InvalidPower { index, value, cap });
            }
        }
        Ok(Self { powers_w })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            powers_w: vec![0.0; n],
        }
    }

    /// Every user at its cap.
    pub fn at_caps(users: &UserSet) -> Self {
        Self {
            powers_w: users.power_caps_w().to_vec(),
        }
    }

    /// Allocation with only the non-negativity check (no caps known).
    pub fn from_powers(powers_w: Vec<f64>) -> Result<Self> {
        for (index, &value) in powers_w.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidPower {
                    index,
                    value,
                    cap: f64::INFINITY,
                });
            }
        }
        Ok(Self { powers_w })
    }

    /// Builds an allocation without bound checks. Solvers use this for powers
    /// they produced by clamping to `[0, cap]`.
    pub(crate) fn from_clamped(powers_w: Vec<f64>) -> Self {
        Self { powers_w }
    }

    pub fn powers_w(&self) -> &[f64] {
        &self.powers_w
    }

    pub fn len(&self) -> usize {
        self.powers_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers_w.is_empty()
    }

    pub fn total_w(&self) -> f64 {
        self.powers_w.iter().sum()
    }
}

/// Free-space LoS gain between a ground user and the antenna.
pub fn channel_gain(user: (f64, f64), antenna: AntennaPosition, scenario: &Scenario) -> f64 {
    let (x, y) = user;
    let dx = antenna.x_m() - x;
    scenario.path_gain_constant() / (dx * dx + y * y + scenario.height_sq())
}

/// Channel gains of every user for one antenna position.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGains {
    gains: Vec<f64>,
    antenna: AntennaPosition,
}

impl ChannelGains {
    pub fn compute(users: &UserSet, antenna: AntennaPosition, scenario: &Scenario) -> Self {
        let gains = users
            .positions()
            .iter()
            .map(|&p| channel_gain(p, antenna, scenario))
            .collect();
        Self { gains, antenna }
    }

    /// Wraps externally computed gains. Every gain must be finite and positive.
    pub fn from_raw(gains: Vec<f64>, antenna: AntennaPosition) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::NoUsers);
        }
        if let Some((index, &value)) = gains
            .iter()
            .enumerate()
            .find(|(_, g)| !(g.is_finite() && **g > 0.0))
        {
            return Err(Error::InvalidGain { index, value });
        }
        Ok(Self { gains, antenna })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn antenna(&self) -> AntennaPosition {
        self.antenna
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// User indices sorted by descending gain. Equal gains keep their original
/// relative order.
pub fn descending_order(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap_or(Ordering::Equal));
    order
}

/// `log2(1 + x)` evaluated without cancellation for small `x`.
pub(crate) fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

fn check_lengths(gains: &ChannelGains, alloc: &PowerAllocation) -> Result<()> {
    if gains.len() != alloc.len() {
        return Err(Error::LengthMismatch {
            what: "powers_w",
            expected: gains.len(),
            got: alloc.len(),
        });
    }
    Ok(())
}

/// SIC rates of every user, returned in the original user order.
///
/// Users are decoded strongest first; user `n` sees the weaker users that
/// have not been cancelled yet as interference.
pub fn per_user_rates(
    gains: &ChannelGains,
    alloc: &PowerAllocation,
    scenario: &Scenario,
) -> Result<Vec<f64>> {
    check_lengths(gains, alloc)?;
    let h = gains.gains();
    let p = alloc.powers_w();
    let order = descending_order(h);
    let mut rates = vec![0.0; h.len()];
    let mut interference = 0.0;
    for &n in order.iter().rev() {
        let received = p[n] * h[n];
        rates[n] = log2_1p(received / (interference + scenario.noise_power_w));
        interference += received;
    }
    Ok(rates)
}

/// Sum of `P_n h_n` over all users.
pub fn weighted_power(gains: &[f64], powers: &[f64]) -> f64 {
    assert_eq!(gains.len(), powers.len(), "gains/powers length mismatch");
    gains.iter().zip(powers).map(|(h, p)| h * p).sum()
}

/// NOMA sum rate `log2(1 + sum P_n h_n / sigma^2)`. The SIC decoding order
/// does not matter once the per-user rates are telescoped.
pub fn sum_rate_noma(gains: &ChannelGains, alloc: &PowerAllocation, scenario: &Scenario) -> f64 {
    log2_1p(weighted_power(gains.gains(), alloc.powers_w()) / scenario.noise_power_w)
}

/// Sum rate over total consumed power (fixed plus transmit).
pub fn energy_efficiency(
    gains: &ChannelGains,
    alloc: &PowerAllocation,
    scenario: &Scenario,
) -> f64 {
    sum_rate_noma(gains, alloc, scenario) / (scenario.fixed_power_w + alloc.total_w())
}

/// One recorded step of an outer solver loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub ee: f64,
}

/// Joint antenna/power solution with its figures of merit.
#[derive(Debug, Clone, PartialEq)]
pub struct EESolution {
    pub antenna: AntennaPosition,
    pub allocation: PowerAllocation,
    pub ee_bits_per_joule: f64,
    pub sum_rate_bits_per_s_hz: f64,
    pub total_power_w: f64,
    pub trace: Vec<TracePoint>,
    /// Set when any inner or outer loop hit its iteration cap.
    pub flagged: bool,
}
