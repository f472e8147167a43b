//! Relative bearing between communicating agents from a single moving
//! antenna.
//!
//! The receiver's own displacement turns a sequence of channel
//! measurements into a virtual antenna array. Pairing forward and reverse
//! packets removes the oscillator offset, a Bartlett beamformer over a
//! direction grid gives the angle-of-arrival profile, and the profile's
//! maximum, variance and distinct peaks form the bearing estimate. Bearings
//! to several known anchors can then be intersected by least squares.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod localization;
pub mod pairing;
pub mod parallel;
pub mod pipeline;
pub mod profile;
pub mod sim;
pub mod steering;
pub mod types;

pub use error::{Error, Result};
pub use pairing::{ExchangeLog, PairedChannel, PairingStats};
pub use parallel::Parallelism;
pub use profile::{AoaProfile, BearingEstimate, BearingOptions, Peak, VarianceForm};
pub use steering::{DirectionGrid, SteeringTable};
pub use types::{
    AgentId, CsiPacket, Direction, GridConfig, PhaseFactor, Resolution, Trajectory,
    TrajectorySample, Vec3,
};
