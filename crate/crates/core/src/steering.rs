//! Direction grid and steering phase tables for a virtual array formed by
//! the receiver's own motion.
//!
//! A plane wave arriving from unit direction `u` reaches a receiver displaced
//! by `d` with an extra phase of `κ·(2π/λ)·(u·d)`. The table stores that
//! phase for every (grid cell, trajectory sample) pair so repeated profile
//! evaluations over the same trajectory skip the geometry.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::types::{Direction, GridConfig, Vec3};

/// Default cap on steering table size: 1 GiB.
pub const DEFAULT_TABLE_BUDGET_BYTES: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    config: GridConfig,
    /// Elevation-major: index = elevation_bin * azimuth_bins + azimuth_bin.
    directions: Vec<Direction>,
    unit_vectors: Vec<Vec3>,
}

impl DirectionGrid {
    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn unit_vectors(&self) -> &[Vec3] {
        &self.unit_vectors
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn azimuth_bins(&self) -> usize {
        self.config.azimuth_bins
    }

    pub fn elevation_bins(&self) -> usize {
        self.config.elevation_bins
    }

    pub fn azimuth_step_rad(&self) -> f64 {
        TAU / self.config.azimuth_bins as f64
    }

    pub fn elevation_step_rad(&self) -> f64 {
        PI / self.config.elevation_bins as f64
    }

    pub fn azimuth_centers_rad(&self) -> Vec<f64> {
        azimuth_centers(self.config.azimuth_bins)
    }

    pub fn elevation_centers_rad(&self) -> Vec<f64> {
        elevation_centers(self.config.elevation_bins)
    }

    pub fn index(&self, elevation_bin: usize, azimuth_bin: usize) -> usize {
        elevation_bin * self.config.azimuth_bins + azimuth_bin
    }

    /// `(elevation_bin, azimuth_bin)` of a flat cell index.
    pub fn bins(&self, cell: usize) -> (usize, usize) {
        (cell / self.config.azimuth_bins, cell % self.config.azimuth_bins)
    }

    /// Cell whose center is nearest to `d`.
    pub fn nearest_cell(&self, d: &Direction) -> usize {
        let a = ((d.azimuth_rad() + PI) / self.azimuth_step_rad()).floor() as usize;
        let e = (d.elevation_rad() / self.elevation_step_rad()).floor() as usize;
        self.index(
            e.min(self.config.elevation_bins - 1),
            a.min(self.config.azimuth_bins - 1),
        )
    }
}

fn azimuth_centers(bins: usize) -> Vec<f64> {
    let step = TAU / bins as f64;
    (0..bins).map(|a| -PI + (a as f64 + 0.5) * step).collect()
}

fn elevation_centers(bins: usize) -> Vec<f64> {
    let step = PI / bins as f64;
    (0..bins).map(|e| (e as f64 + 0.5) * step).collect()
}

/// Grid of bin-center directions covering the full sphere.
pub fn build_grid(config: GridConfig) -> Result<DirectionGrid> {
    config.validate()?;
    let az = azimuth_centers(config.azimuth_bins);
    let el = elevation_centers(config.elevation_bins);
    let mut directions = Vec::with_capacity(az.len() * el.len());
    for &e in &el {
        for &a in &az {
            directions.push(Direction::new(a, e)?);
        }
    }
    let unit_vectors = directions.iter().map(Direction::unit_vector).collect();
    Ok(DirectionGrid {
        config,
        directions,
        unit_vectors,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SteeringOptions {
    pub memory_budget_bytes: u64,
    pub parallelism: Parallelism,
}

impl Default for SteeringOptions {
    fn default() -> Self {
        Self {
            memory_budget_bytes: DEFAULT_TABLE_BUDGET_BYTES,
            parallelism: Parallelism::default(),
        }
    }
}

/// Phase table, cell-major: `phases[cell * n_samples + m]`.
#[derive(Debug, Clone)]
pub struct SteeringTable {
    grid: Arc<DirectionGrid>,
    n_samples: usize,
    phases: Vec<f64>,
}

impl SteeringTable {
    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_cells(&self) -> usize {
        self.grid.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn cell_phases(&self, cell: usize) -> &[f64] {
        &self.phases[cell * self.n_samples..(cell + 1) * self.n_samples]
    }

    pub fn phase(&self, cell: usize, sample: usize) -> f64 {
        self.phases[cell * self.n_samples + sample]
    }
}

/// Bytes needed for a table over `cells` directions and `samples` positions.
pub fn table_bytes(cells: usize, samples: usize) -> u64 {
    (cells as u64) * (samples as u64) * std::mem::size_of::<f64>() as u64
}

/// `κ·2π/λ` for a grid configuration.
pub fn phase_scale(config: &GridConfig) -> f64 {
    config.phase_factor.kappa() * TAU / config.wavelength_m
}

#[inline]
pub(crate) fn steering_phase(scale: f64, u: &Vec3, d: &Vec3) -> f64 {
    scale * (u.x * d.x + u.y * d.y + u.z * d.z)
}

pub fn precompute_steering(
    grid: &Arc<DirectionGrid>,
    positions: &[Vec3],
    opts: &SteeringOptions,
) -> Result<SteeringTable> {
    if positions.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
        return Err(Error::invalid("non-finite trajectory position"));
    }
    let required = table_bytes(grid.len(), positions.len());
    if required > opts.memory_budget_bytes {
        return Err(Error::ResourceLimit {
            required,
            budget: opts.memory_budget_bytes,
        });
    }
    let scale = phase_scale(grid.config());
    let n = positions.len();
    let mut phases = vec![0.0; grid.len() * n];
    if n > 0 {
        let units = grid.unit_vectors();
        opts.parallelism.fill_chunks(&mut phases, n, |cell, row| {
            let u = &units[cell];
            for (p, d) in row.iter_mut().zip(positions) {
                *p = steering_phase(scale, u, d);
            }
        });
    }
    Ok(SteeringTable {
        grid: Arc::clone(grid),
        n_samples: n,
        phases,
    })
}
