//! Least-squares intersection of bearing rays.
//!
//! Each observation defines a line through a known anchor `a_j` along the
//! unit vector `n_j = (cos b_j, sin b_j)`. The position estimate minimises
//! the summed squared distance to all lines, which reduces to the 2×2
//! normal equations `Σ (I − n nᵀ) p = Σ (I − n nᵀ) a`.

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::types::wrap_unchecked;

/// Condition number above which the rays are treated as parallel.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingObservation {
    pub anchor: Vector2<f64>,
    /// Direction of the ray from the anchor toward the localizing agent.
    pub bearing_rad: f64,
    pub variance: f64,
}

impl BearingObservation {
    pub fn new(anchor: Vector2<f64>, bearing_rad: f64, variance: f64) -> Result<Self> {
        Ok(Self {
            anchor,
            bearing_rad: crate::types::wrap_azimuth(bearing_rad)?,
            variance,
        })
    }

    pub fn direction(&self) -> Vector2<f64> {
        let (s, c) = self.bearing_rad.sin_cos();
        Vector2::new(c, s)
    }

    /// Distance from `p` to the line through the anchor along the bearing.
    pub fn distance(&self, p: &Vector2<f64>) -> f64 {
        let n = self.direction();
        let v = p - self.anchor;
        (v - n * v.dot(&n)).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub position: Vector2<f64>,
    /// Sum of squared ray distances at the solution.
    pub residual: f64,
    pub used: usize,
    /// Set when the solution lies behind at least one anchor, i.e. on the
    /// opposite side of the bearing direction.
    pub behind_anchor: bool,
}

/// Observations whose profile variance does not exceed `tau`.
pub fn filter_outliers(observations: &[BearingObservation], tau: f64) -> Vec<BearingObservation> {
    observations
        .iter()
        .filter(|o| o.variance <= tau)
        .copied()
        .collect()
}

/// Point closest, in summed squared distance, to lines `(origin, unit dir)`
/// of any common dimension.
fn intersect_lines(lines: &[(DVector<f64>, DVector<f64>)]) -> Result<DVector<f64>> {
    let dim = lines.first().map_or(0, |(o, _)| o.len());
    let mut normal = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (origin, dir) in lines {
        let proj = DMatrix::<f64>::identity(dim, dim) - dir * dir.transpose();
        rhs += &proj * origin;
        normal += proj;
    }
    let eig = normal.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let degenerate = Error::DegenerateGeometry {
        condition,
        limit: MAX_CONDITION,
    };
    if !(condition <= MAX_CONDITION) {
        return Err(degenerate);
    }
    normal.cholesky().map(|c| c.solve(&rhs)).ok_or(degenerate)
}

pub fn localize(observations: &[BearingObservation], tau: f64) -> Result<Localization> {
    let kept = filter_outliers(observations, tau);
    if kept.len() < 2 {
        return Err(Error::InsufficientObservations { used: kept.len() });
    }
    let lines: Vec<_> = kept
        .iter()
        .map(|o| {
            (
                DVector::from_column_slice(o.anchor.as_slice()),
                DVector::from_column_slice(o.direction().as_slice()),
            )
        })
        .collect();
    let solution = intersect_lines(&lines)?;
    let position = Vector2::new(solution[0], solution[1]);
    let residual = kept.iter().map(|o| o.distance(&position).powi(2)).sum();
    let behind_anchor = kept
        .iter()
        .any(|o| (position - o.anchor).dot(&o.direction()) < 0.0);
    Ok(Localization {
        position,
        residual,
        used: kept.len(),
        behind_anchor,
    })
}

/// Exact bearing from `anchor` toward `target`.
pub fn bearing_toward(anchor: &Vector2<f64>, target: &Vector2<f64>) -> f64 {
    let v = target - anchor;
    wrap_unchecked(v.y.atan2(v.x))
}

/// Standard normal truncated to ±`limit` by rejection.
fn truncated_normal(rng: &mut ChaCha8Rng, limit: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= limit {
            return z;
        }
    }
}

/// Truncation point of the bearing noise, in standard deviations.
pub const NOISE_TRUNCATION_SIGMAS: f64 = 3.0;

/// Position errors of repeated localizations with noisy bearings.
///
/// Trial `k` draws from its own ChaCha stream, so results do not depend on
/// the thread count. Trials whose geometry degenerates report infinity.
pub fn monte_carlo_errors(
    anchors: &[Vector2<f64>],
    target: Vector2<f64>,
    bearing_noise_std_rad: f64,
    trials: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Vec<f64> {
    parallelism.map_range(trials, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let obs: Vec<BearingObservation> = anchors
            .iter()
            .map(|a| {
                let noise = bearing_noise_std_rad * truncated_normal(&mut rng, NOISE_TRUNCATION_SIGMAS);
                BearingObservation {
                    anchor: *a,
                    bearing_rad: wrap_unchecked(bearing_toward(a, &target) + noise),
                    variance: 0.0,
                }
            })
            .collect();
        match localize(&obs, f64::INFINITY) {
            Ok(loc) => (loc.position - target).norm(),
            Err(_) => f64::INFINITY,
        }
    })
}

/// Median of a sample; `NaN` for an empty one.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
