//! Synthetic multipath channel generator.
//!
//! Every propagation path is modelled as a point source (the transmitter
//! itself or a mirror-image virtual source for a reflection). A path at
//! distance `r` from the receiver contributes `g / r · e^{-j·2π·r/λ}`.
//! Packets follow the round-robin schedule: the receiver broadcasts, the
//! transmitter replies, and both measurements of a round see the same
//! geometry.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairing::{round_robin_schedule, ExchangeLog};
use crate::types::{AgentId, CsiPacket, Direction, Trajectory, Vec3, DEFAULT_WAVELENGTH_M};

/// Packet rate of the standard capture, packets per second.
pub const STANDARD_PACKET_RATE_HZ: f64 = 200.0;
/// Length of the standard capture: 880 packets at 200 packets/s.
pub const STANDARD_DURATION_S: f64 = 4.4;
pub const STANDARD_LINEAR_M_S: f64 = 0.2;
pub const STANDARD_ANGULAR_RAD_S: f64 = 0.4;
/// Trajectory sampling rate of the standard capture.
pub const STANDARD_TRAJECTORY_HZ: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflector {
    pub virtual_source_position: Vec3,
    pub gain: f64,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH_M
}

fn default_rx() -> AgentId {
    AgentId(0)
}

fn default_tx() -> AgentId {
    AgentId(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Transmitter position in the receiver's frame at the first sample.
    pub tx_position: Vec3,
    #[serde(default)]
    pub reflectors: Vec<Reflector>,
    /// Standard deviation of complex Gaussian noise, relative to a unit-gain
    /// path at 1 m.
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub cfo_enabled: bool,
    #[serde(default)]
    pub loss_rate: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
    #[serde(default = "default_rx")]
    pub rx_id: AgentId,
    #[serde(default = "default_tx")]
    pub tx_id: AgentId,
}

impl Scene {
    /// Noise-free line-of-sight scene.
    pub fn line_of_sight(tx_position: Vec3) -> Self {
        Self {
            tx_position,
            reflectors: Vec::new(),
            noise_std: 0.0,
            cfo_enabled: false,
            loss_rate: 0.0,
            rng_seed: 0,
            wavelength_m: DEFAULT_WAVELENGTH_M,
            rx_id: default_rx(),
            tx_id: default_tx(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_position.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite transmitter position"));
        }
        if let Some(r) = self.reflectors.iter().find(|r| !(0.0..=1.0).contains(&r.gain)) {
            return Err(Error::invalid(format!("reflector gain {} outside [0, 1]", r.gain)));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::invalid(format!("noise_std {} must be >= 0", self.noise_std)));
        }
        if !(0.0..=1.0).contains(&self.loss_rate) {
            return Err(Error::invalid(format!("loss_rate {} outside [0, 1]", self.loss_rate)));
        }
        if !(self.wavelength_m > 0.0) || !self.wavelength_m.is_finite() {
            return Err(Error::invalid(format!("wavelength {} must be positive", self.wavelength_m)));
        }
        if self.rx_id == self.tx_id {
            return Err(Error::invalid("receiver and transmitter share an id"));
        }
        Ok(())
    }

    fn paths(&self) -> impl Iterator<Item = (Vec3, f64)> + '_ {
        std::iter::once((self.tx_position, 1.0)).chain(
            self.reflectors
                .iter()
                .map(|r| (r.virtual_source_position, r.gain)),
        )
    }

    /// Noise-free, offset-free channel at receiver position `p`.
    pub fn geometric_channel(&self, p: &Vec3) -> Result<Complex64> {
        let k = TAU / self.wavelength_m;
        let mut h = Complex64::new(0.0, 0.0);
        for (src, gain) in self.paths() {
            let r = (src - p).norm();
            if r < 1e-9 {
                return Err(Error::SingularGeometry(format!(
                    "source at {:?} coincides with the receiver path",
                    src.as_slice()
                )));
            }
            h += Complex64::from_polar(gain / r, -k * r);
        }
        Ok(h)
    }
}

fn complex_noise(rng: &mut ChaCha8Rng, std: f64) -> Complex64 {
    let s = std / std::f64::consts::SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Generates forward and reverse packet streams for a scene.
///
/// Each round draws, in order: the oscillator offset, forward noise,
/// reverse noise, forward loss and reverse loss. Draws happen whether or
/// not the corresponding effect is enabled, so toggling one effect leaves
/// every other draw unchanged for the same seed.
pub fn simulate_channel(scene: &Scene, traj: &Trajectory, packet_rate_hz: f64) -> Result<ExchangeLog> {
    scene.validate()?;
    if !(packet_rate_hz > 0.0) || !packet_rate_hz.is_finite() {
        return Err(Error::invalid(format!("packet rate {packet_rate_hz} must be positive")));
    }
    let span = traj.end_time() - traj.start_time();
    if !(span > 0.0) {
        return Err(Error::invalid("trajectory spans no time"));
    }

    let schedule = round_robin_schedule(scene.rx_id, &[scene.tx_id], 1)?;
    let period = 1.0 / packet_rate_hz;
    let slot = period / schedule.len() as f64;
    let reply_offset = slot * (schedule.len() - 1) as f64;
    let n_rounds = ((span - reply_offset) / period + 1e-9).floor() as u64 + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
    let mut log = ExchangeLog {
        forward: Vec::with_capacity(n_rounds as usize),
        reverse: Vec::with_capacity(n_rounds as usize),
    };
    for round in 0..n_rounds {
        let t_reverse = traj.start_time() + round as f64 * period;
        let t_forward = t_reverse + reply_offset;
        let p = traj
            .position_at(t_forward)
            .ok_or_else(|| Error::invalid("scheduled packet outside trajectory span"))?;
        let geo = scene.geometric_channel(&p)?;

        let eps: f64 = rng.random_range(-PI..PI);
        let n_fwd = complex_noise(&mut rng, scene.noise_std);
        let n_rev = complex_noise(&mut rng, scene.noise_std);
        let keep_fwd = rng.random::<f64>() >= scene.loss_rate;
        let keep_rev = rng.random::<f64>() >= scene.loss_rate;

        let offset = if scene.cfo_enabled {
            Complex64::from_polar(1.0, eps)
        } else {
            Complex64::new(1.0, 0.0)
        };
        let counter = round + 1;
        if keep_fwd {
            log.forward.push(CsiPacket {
                sender: scene.tx_id,
                receiver: scene.rx_id,
                counter,
                timestamp: t_forward,
                channel: geo * offset + n_fwd,
            });
        }
        if keep_rev {
            log.reverse.push(CsiPacket {
                sender: scene.rx_id,
                receiver: scene.tx_id,
                counter,
                timestamp: t_reverse,
                channel: geo * offset.conj() + n_rev,
            });
        }
    }
    Ok(log)
}

/// Bearing of the transmitter from the trajectory origin.
pub fn ground_truth_bearing(scene: &Scene, traj: &Trajectory) -> Result<Direction> {
    let v = scene.tx_position - traj.origin();
    if v.norm() < 1e-12 {
        return Err(Error::SingularGeometry("transmitter at the receiver origin".into()));
    }
    Direction::from_vector(&v)
}

/// Planar arc at the standard capture's speeds and duration.
pub fn standard_trajectory() -> Trajectory {
    Trajectory::planar_arc(
        STANDARD_LINEAR_M_S,
        STANDARD_ANGULAR_RAD_S,
        STANDARD_DURATION_S,
        STANDARD_TRAJECTORY_HZ,
    )
    .expect("standard arc parameters are valid")
}
