//! Shared domain types and angle conventions.
//!
//! Directions use the polar convention: azimuth `φ` is measured
//! counter-clockwise from +x in the x-y plane, elevation `θ` is the polar
//! angle from +z, so the horizontal plane sits at `θ = π/2`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Carrier wavelength of 5 GHz channel 36 (5.18 GHz), in meters.
pub const DEFAULT_WAVELENGTH_M: f64 = 299_792_458.0 / 5.18e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_azimuth(angle: f64) -> Result<f64> {
    if !angle.is_finite() {
        return Err(Error::invalid(format!("non-finite angle {angle}")));
    }
    Ok(wrap_unchecked(angle))
}

pub(crate) fn wrap_unchecked(angle: f64) -> f64 {
    if (-PI..PI).contains(&angle) {
        return angle;
    }
    let mut r = angle - TAU * ((angle + PI) / TAU).floor();
    if r >= PI {
        r -= TAU;
    }
    if r < -PI {
        r += TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    azimuth_rad: f64,
    elevation_rad: f64,
}

impl Direction {
    /// Builds a direction, wrapping azimuth into `[-π, π)`. Elevation must
    /// already lie in `[0, π]`.
    pub fn new(azimuth_rad: f64, elevation_rad: f64) -> Result<Self> {
        let azimuth_rad = wrap_azimuth(azimuth_rad)?;
        if !(0.0..=PI).contains(&elevation_rad) {
            return Err(Error::invalid(format!(
                "elevation {elevation_rad} outside [0, π]"
            )));
        }
        Ok(Self {
            azimuth_rad,
            elevation_rad,
        })
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    /// Direction of a non-zero vector.
    pub fn from_vector(v: &Vec3) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("direction of a zero or non-finite vector"));
        }
        let elevation = (v.z / norm).clamp(-1.0, 1.0).acos();
        let azimuth = v.y.atan2(v.x);
        Self::new(azimuth, elevation)
    }

    pub fn azimuth_rad(&self) -> f64 {
        self.azimuth_rad
    }

    pub fn elevation_rad(&self) -> f64 {
        self.elevation_rad
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_rad.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_rad.to_degrees()
    }

    pub fn unit_vector(&self) -> Vec3 {
        direction_unit_vector(self)
    }
}

/// `(cosφ·sinθ, sinφ·sinθ, cosθ)`.
pub fn direction_unit_vector(d: &Direction) -> Vec3 {
    let (sin_az, cos_az) = d.azimuth_rad.sin_cos();
    let (sin_el, cos_el) = d.elevation_rad.sin_cos();
    Vec3::new(cos_az * sin_el, sin_az * sin_el, cos_el)
}

/// Absolute azimuth difference, wrapped so the seam at ±π is continuous.
pub fn azimuth_distance(a: f64, b: f64) -> f64 {
    wrap_unchecked(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec3,
}

/// Receiver displacements over a measurement window, expressed in the
/// receiver's frame at the first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("empty trajectory"))?;
        if first.position.norm() > 1e-12 {
            return Err(Error::invalid(
                "trajectory must start at the zero displacement",
            ));
        }
        Self::validate(&samples)?;
        Ok(Self { samples })
    }

    /// Rebases samples so the first position becomes the origin.
    pub fn rebased(mut samples: Vec<TrajectorySample>) -> Result<Self> {
        let origin = samples
            .first()
            .ok_or_else(|| Error::invalid("empty trajectory"))?
            .position;
        for s in &mut samples {
            s.position -= origin;
        }
        Self::validate(&samples)?;
        Ok(Self { samples })
    }

    fn validate(samples: &[TrajectorySample]) -> Result<()> {
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || s.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-finite trajectory sample at index {i}"
                )));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid(format!(
                "trajectory timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(())
    }

    /// Constant-speed planar arc starting at the origin heading +x and
    /// turning counter-clockwise. `angular_rad_s = 0` gives a straight line.
    pub fn planar_arc(
        linear_m_s: f64,
        angular_rad_s: f64,
        duration_s: f64,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if !(duration_s > 0.0) || !(sample_rate_hz > 0.0) {
            return Err(Error::invalid("arc duration and sample rate must be positive"));
        }
        let n = (duration_s * sample_rate_hz).round() as usize;
        let samples = (0..=n)
            .map(|k| {
                let t = duration_s * k as f64 / n as f64;
                let position = if angular_rad_s.abs() < 1e-15 {
                    Vec3::new(linear_m_s * t, 0.0, 0.0)
                } else {
                    let radius = linear_m_s / angular_rad_s;
                    let heading = angular_rad_s * t;
                    Vec3::new(radius * heading.sin(), radius * (1.0 - heading.cos()), 0.0)
                };
                TrajectorySample { t, position }
            })
            .collect();
        Self::new(samples)
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn origin(&self) -> Vec3 {
        self.samples[0].position
    }

    /// Linearly interpolated position, `None` outside the sampled span.
    pub fn position_at(&self, t: f64) -> Option<Vec3> {
        if !(t >= self.start_time() && t <= self.end_time()) {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.t < t);
        let hi = &self.samples[idx];
        if hi.t == t || idx == 0 {
            return Some(hi.position);
        }
        let lo = &self.samples[idx - 1];
        let frac = (t - lo.t) / (hi.t - lo.t);
        Some(lo.position + (hi.position - lo.position) * frac)
    }

    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }

    /// Whether the path is long enough to form a useful virtual aperture
    /// (at least two wavelengths).
    pub fn meets_min_aperture(&self, wavelength_m: f64) -> bool {
        self.path_length() >= 2.0 * wavelength_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseFactor {
    /// Phase of a one-way measurement, `κ = 1`.
    SingleTrip,
    /// Phase of a forward × reverse product, `κ = 2`.
    RoundTrip,
}

impl PhaseFactor {
    pub fn kappa(self) -> f64 {
        match self {
            PhaseFactor::SingleTrip => 1.0,
            PhaseFactor::RoundTrip => 2.0,
        }
    }
}

impl FromStr for PhaseFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-trip" | "single" => Ok(PhaseFactor::SingleTrip),
            "round-trip" | "round" => Ok(PhaseFactor::RoundTrip),
            other => Err(Error::invalid(format!("unknown phase factor '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub azimuth_bins: usize,
    pub elevation_bins: usize,
    pub wavelength_m: f64,
    pub phase_factor: PhaseFactor,
}

impl GridConfig {
    pub fn new(
        azimuth_bins: usize,
        elevation_bins: usize,
        wavelength_m: f64,
        phase_factor: PhaseFactor,
    ) -> Result<Self> {
        let cfg = Self {
            azimuth_bins,
            elevation_bins,
            wavelength_m,
            phase_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.azimuth_bins < 4 {
            return Err(Error::invalid(format!(
                "azimuth_bins {} < 4",
                self.azimuth_bins
            )));
        }
        if self.elevation_bins < 2 {
            return Err(Error::invalid(format!(
                "elevation_bins {} < 2",
                self.elevation_bins
            )));
        }
        if !(self.wavelength_m > 0.0) || !self.wavelength_m.is_finite() {
            return Err(Error::invalid(format!(
                "wavelength {} must be positive",
                self.wavelength_m
            )));
        }
        Ok(())
    }

    pub fn with_resolution(mut self, resolution: Resolution) -> Result<Self> {
        self.azimuth_bins = resolution.azimuth_bins;
        self.elevation_bins = resolution.elevation_bins;
        self.validate()?;
        Ok(self)
    }

    pub fn cells(&self) -> usize {
        self.azimuth_bins * self.elevation_bins
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            azimuth_bins: 360,
            elevation_bins: 180,
            wavelength_m: DEFAULT_WAVELENGTH_M,
            phase_factor: PhaseFactor::RoundTrip,
        }
    }
}

/// Grid resolution written as `AxE`, e.g. `360x180`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub azimuth_bins: usize,
    pub elevation_bins: usize,
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("resolution '{s}' is not of the form AxE"));
        let (a, e) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok(Self {
            azimuth_bins: a.trim().parse().map_err(|_| bad())?,
            elevation_bins: e.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.azimuth_bins, self.elevation_bins)
    }
}

/// One channel observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiPacket {
    pub sender: AgentId,
    pub receiver: AgentId,
    pub counter: u64,
    pub timestamp: f64,
    pub channel: Complex64,
}

impl CsiPacket {
    pub fn is_valid(&self) -> bool {
        self.channel.norm() > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_azimuth(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(wrap_azimuth(3.0 * PI / 2.0).unwrap(), -FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(wrap_azimuth(-PI).unwrap(), -PI);
        assert_eq!(wrap_azimuth(PI).unwrap(), -PI);
        assert!(wrap_azimuth(f64::NAN).is_err());
        assert!(wrap_azimuth(f64::INFINITY).is_err());
    }

    #[test]
    fn unit_vector_axes() {
        let x = direction_unit_vector(&Direction::new(0.0, FRAC_PI_2).unwrap());
        assert_abs_diff_eq!(x, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        let y = direction_unit_vector(&Direction::new(FRAC_PI_2, FRAC_PI_2).unwrap());
        assert_abs_diff_eq!(y, Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
        let z = direction_unit_vector(&Direction::new(0.0, 0.0).unwrap());
        assert_abs_diff_eq!(z, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn direction_rejects_bad_elevation() {
        assert!(Direction::new(0.0, -0.1).is_err());
        assert!(Direction::new(0.0, PI + 1e-9).is_err());
    }

    #[test]
    fn trajectory_interpolates_and_validates() {
        let s = |t, x| TrajectorySample {
            t,
            position: Vec3::new(x, 0.0, 0.0),
        };
        let traj = Trajectory::new(vec![s(0.0, 0.0), s(1.0, 1.0), s(2.0, 1.0)]).unwrap();
        assert_eq!(traj.position_at(1.0).unwrap(), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(traj.position_at(0.5).unwrap(), Vec3::new(0.5, 0.0, 0.0));
        assert!(traj.position_at(2.5).is_none());
        assert!(Trajectory::new(vec![s(0.0, 0.0), s(0.0, 1.0)]).is_err());
        assert!(Trajectory::new(vec![s(0.0, 0.3)]).is_err());
        assert!(Trajectory::new(vec![]).is_err());
        let rebased = Trajectory::rebased(vec![s(0.0, 2.0), s(1.0, 3.0)]).unwrap();
        assert_eq!(rebased.samples()[1].position, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn arc_has_expected_extent() {
        let arc = Trajectory::planar_arc(0.2, 0.4, 4.0, 100.0).unwrap();
        assert_abs_diff_eq!(arc.path_length(), 0.8, epsilon = 1e-3);
        assert!(arc.meets_min_aperture(DEFAULT_WAVELENGTH_M));
        let stub = Trajectory::planar_arc(0.01, 0.0, 1.0, 10.0).unwrap();
        assert!(!stub.meets_min_aperture(DEFAULT_WAVELENGTH_M));
    }

    #[test]
    fn resolution_parses() {
        let r: Resolution = "180x90".parse().unwrap();
        assert_eq!((r.azimuth_bins, r.elevation_bins), (180, 90));
        assert!("180".parse::<Resolution>().is_err());
        assert!("ax9".parse::<Resolution>().is_err());
        assert!(GridConfig::default().with_resolution("3x2".parse().unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn unit_vector_is_normalized(az in -10.0f64..10.0, el in 0.0f64..=PI) {
            let v = direction_unit_vector(&Direction::new(az, el).unwrap());
            prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn wrap_is_idempotent_and_congruent(x in -1e4f64..1e4) {
            let w = wrap_azimuth(x).unwrap();
            prop_assert!((-PI..PI).contains(&w));
            prop_assert_eq!(wrap_azimuth(w).unwrap(), w);
            let turns = (x - w) / TAU;
            prop_assert!((turns - turns.round()).abs() < 1e-9);
        }
    }
}
