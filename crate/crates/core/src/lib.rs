//! Energy-efficiency maximization for a NOMA uplink served by a single
//! pinching antenna on a dielectric waveguide.
//!
//! The joint problem (antenna position and user powers) is split into two
//! subproblems solved alternately: an exact sequential Dinkelbach power
//! allocation ([`power`]) and a particle-swarm antenna placement
//! ([`antenna`]). [`ao`] ties them together and implements the baseline
//! schemes; [`harness`] runs seeded Monte Carlo sweeps over all of them.

pub mod antenna;
pub mod ao;
pub mod error;
pub mod harness;
pub mod model;
pub mod power;
pub mod streams;
pub mod tdma;

pub use ao::{alternating_optimize, solve_scheme, AoConfig, InitMode, SchemeKind};
pub use error::{Error, Result};
pub use model::{
    AntennaPosition, ChannelGains, EESolution, PowerAllocation, Scenario, TracePoint, UserSet,
};
