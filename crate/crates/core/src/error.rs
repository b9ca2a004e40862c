use thiserror::Error;

/// Errors raised while validating inputs or running solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scenario: {field} must be finite and strictly positive (got {value})")]
    InvalidScenario { field: &'static str, value: f64 },

    #[error("user set is empty")]
    NoUsers,

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("user {index} at ({x}, {y}) lies outside the service area")]
    UserOutOfArea { index: usize, x: f64, y: f64 },

    #[error("power cap of user {index} must be finite and strictly positive (got {value})")]
    InvalidPowerCap { index: usize, value: f64 },

    #[error("channel gain of user {index} must be finite and strictly positive (got {value})")]
    InvalidGain { index: usize, value: f64 },

    #[error("power of user {index} is {value}, outside [0, {cap}]")]
    InvalidPower { index: usize, value: f64, cap: f64 },

    #[error("antenna position {x} lies outside the waveguide [0, {length}]")]
    AntennaOutOfRange { x: f64, length: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error(
        "{flagged} of {total} solves did not converge for scheme {scheme} at sweep value {sweep_value}"
    )]
    TooManyFlagged {
        scheme: String,
        sweep_value: f64,
        flagged: usize,
        total: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
