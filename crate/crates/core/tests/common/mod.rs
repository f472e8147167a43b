#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bearing_core::pairing::build_channel;
use bearing_core::profile::{analyze_profile, compute_profile_with};
use bearing_core::sim::{ground_truth_bearing, simulate_channel, standard_trajectory, Scene};
use bearing_core::steering::{build_grid, precompute_steering, SteeringOptions};
use bearing_core::types::azimuth_distance;
use bearing_core::{
    AoaProfile, BearingEstimate, BearingOptions, Direction, DirectionGrid, GridConfig,
    Parallelism, PhaseFactor, SteeringTable, Trajectory, Vec3,
};

pub const PACKET_RATE_HZ: f64 = 200.0;

/// Range band for single-path scenes. The estimate is a plane-wave fit over
/// the whole arc while ground truth is taken from the arc's start, so a
/// source at range r reads about 0.4 m / r rad off; 60 m keeps that under
/// half a default bin.
pub const FAR_RANGE_M: (f64, f64) = (60.0, 100.0);

/// Single-path scenes with the transmitter at a random azimuth in the
/// receiver's plane and a random range in `FAR_RANGE_M`. The scene's own
/// seed is `seed * 1000 + k`.
pub fn far_field_scenes(n: usize, seed: u64) -> Vec<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let az = rng.random_range(-PI..PI);
            let r = rng.random_range(FAR_RANGE_M.0..FAR_RANGE_M.1);
            let mut scene = Scene::line_of_sight(Vec3::new(r * az.cos(), r * az.sin(), 0.0));
            scene.rng_seed = seed * 1000 + k as u64;
            scene
        })
        .collect()
}

pub fn at(azimuth_deg: f64, range_m: f64) -> Vec3 {
    let a = azimuth_deg.to_radians();
    Vec3::new(range_m * a.cos(), range_m * a.sin(), 0.0)
}

pub fn azimuth_error_deg(estimate: &Direction, truth: &Direction) -> f64 {
    azimuth_distance(estimate.azimuth_rad(), truth.azimuth_rad()).to_degrees()
}

/// Wrapped azimuth-bin distance between two cells.
pub fn azimuth_bin_distance(grid: &DirectionGrid, a: usize, b: usize) -> usize {
    let n = grid.azimuth_bins();
    let d = grid.bins(a).1.abs_diff(grid.bins(b).1);
    d.min(n - d)
}

pub fn median(v: &[f64]) -> f64 {
    bearing_core::localization::median(v)
}

/// Evaluates many scenes on one trajectory, sharing the steering table.
/// Only valid while no packets are lost, so every scene yields the same
/// sample positions.
pub struct Runner {
    pub traj: Trajectory,
    pub grid: Arc<DirectionGrid>,
    pub table: SteeringTable,
    positions: Vec<Vec3>,
    pub parallelism: Parallelism,
}

pub struct Outcome {
    pub profile: AoaProfile,
    pub estimate: BearingEstimate,
    pub truth: Direction,
}

impl Outcome {
    pub fn error_deg(&self) -> f64 {
        azimuth_error_deg(&self.estimate.aoa_max.direction, &self.truth)
    }

    pub fn bin_error(&self) -> usize {
        let grid = self.profile.grid();
        azimuth_bin_distance(grid, self.estimate.aoa_max.cell, grid.nearest_cell(&self.truth))
    }
}

impl Runner {
    pub fn new(config: GridConfig) -> Self {
        Self::with_trajectory(config, standard_trajectory())
    }

    pub fn with_trajectory(config: GridConfig, traj: Trajectory) -> Self {
        let probe = Scene::line_of_sight(Vec3::new(1e3, 0.0, 0.0));
        let log = simulate_channel(&probe, &traj, PACKET_RATE_HZ).unwrap();
        let channel = build_channel(&log, &traj, config.phase_factor, 0).unwrap();
        let positions = channel.positions();
        let grid = Arc::new(build_grid(config).unwrap());
        let table = precompute_steering(&grid, &positions, &SteeringOptions::default()).unwrap();
        Self {
            traj,
            grid,
            table,
            positions,
            parallelism: Parallelism::default(),
        }
    }

    pub fn phase_factor(&self) -> PhaseFactor {
        self.grid.config().phase_factor
    }

    pub fn run(&self, scene: &Scene, opts: &BearingOptions) -> Outcome {
        let log = simulate_channel(scene, &self.traj, PACKET_RATE_HZ).unwrap();
        let channel = build_channel(&log, &self.traj, self.phase_factor(), 0).unwrap();
        assert_eq!(channel.positions(), self.positions, "scene lost packets");
        let profile = compute_profile_with(&channel, &self.table, self.parallelism).unwrap();
        let estimate = analyze_profile(&profile, opts).unwrap();
        let truth = ground_truth_bearing(scene, &self.traj).unwrap();
        Outcome {
            profile,
            estimate,
            truth,
        }
    }
}

pub fn single_trip(azimuth_bins: usize, elevation_bins: usize) -> GridConfig {
    GridConfig {
        azimuth_bins,
        elevation_bins,
        phase_factor: PhaseFactor::SingleTrip,
        ..GridConfig::default()
    }
}

pub fn round_trip(azimuth_bins: usize, elevation_bins: usize) -> GridConfig {
    GridConfig {
        azimuth_bins,
        elevation_bins,
        phase_factor: PhaseFactor::RoundTrip,
        ..GridConfig::default()
    }
}
