//! End-to-end estimation: exchange log and trajectory in, profile and
//! bearing estimate out.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::io::{DatasetRecord, RecordMeta, TrajectorySource};
use crate::pairing::{build_channel, ExchangeLog, PairingStats};
use crate::parallel::Parallelism;
use crate::profile::{analyze_profile, compute_profile_with, AoaProfile, BearingEstimate, BearingOptions};
use crate::sim::{simulate_channel, standard_trajectory, Scene, STANDARD_PACKET_RATE_HZ};
use crate::steering::{build_grid, precompute_steering, SteeringOptions, DEFAULT_TABLE_BUDGET_BYTES};
use crate::types::{GridConfig, Resolution, Trajectory, Vec3};

/// Transmitter of the clean standard fixture: 50 m out, 36.87° azimuth.
pub const STANDARD_FIXTURE_TX: [f64; 3] = [40.0, 30.0, 0.0];

#[derive(Debug, Clone, Copy)]
pub struct EstimateConfig {
    pub grid: GridConfig,
    /// Keep every `subsample`-th paired packet.
    pub subsample: usize,
    pub bearing: BearingOptions,
    pub max_counter_skew: u64,
    pub parallelism: Parallelism,
    pub memory_budget_bytes: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            subsample: 1,
            bearing: BearingOptions::default(),
            max_counter_skew: 0,
            parallelism: Parallelism::default(),
            memory_budget_bytes: DEFAULT_TABLE_BUDGET_BYTES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimation {
    pub profile: AoaProfile,
    pub estimate: BearingEstimate,
    pub stats: PairingStats,
    pub precompute_s: f64,
    pub profile_s: f64,
    /// Wall time from raw log to finished estimate.
    pub total_s: f64,
}

pub fn estimate_from_log(log: &ExchangeLog, traj: &Trajectory, cfg: &EstimateConfig) -> Result<Estimation> {
    let start = Instant::now();
    let channel = build_channel(log, traj, cfg.grid.phase_factor, cfg.max_counter_skew)?
        .subsample(cfg.subsample);
    let grid = Arc::new(build_grid(cfg.grid)?);
    let steering = SteeringOptions {
        memory_budget_bytes: cfg.memory_budget_bytes,
        parallelism: cfg.parallelism,
    };
    let t0 = Instant::now();
    let table = precompute_steering(&grid, &channel.positions(), &steering)?;
    let precompute_s = t0.elapsed().as_secs_f64();
    let profile = compute_profile_with(&channel, &table, cfg.parallelism)?;
    drop(table);
    let estimate = analyze_profile(&profile, &cfg.bearing)?;
    Ok(Estimation {
        profile_s: profile.compute_time_s,
        profile,
        estimate,
        stats: channel.stats,
        precompute_s,
        total_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs the pipeline on a loaded record, taking the carrier wavelength from
/// the record's metadata.
pub fn estimate_record(
    record: &DatasetRecord,
    source: TrajectorySource,
    cfg: &EstimateConfig,
) -> Result<Estimation> {
    let traj = record.trajectory(source)?;
    let mut cfg = *cfg;
    cfg.grid.wavelength_m = record.meta.wavelength_m;
    estimate_from_log(&record.log, traj, &cfg)
}

/// Simulates a scene and packages it as a dataset record with the
/// trajectory as ground truth.
pub fn simulated_record(scene: &Scene, traj: &Trajectory, packet_rate_hz: f64) -> Result<DatasetRecord> {
    let log = simulate_channel(scene, traj, packet_rate_hz)?;
    let tx = scene.tx_position;
    Ok(DatasetRecord {
        meta: RecordMeta {
            rx_id: scene.rx_id,
            tx_id: scene.tx_id,
            tx_position: Some([tx.x, tx.y, tx.z]),
            rx_label: None,
            environment: None,
            wavelength_m: scene.wavelength_m,
            extra: Default::default(),
        },
        log,
        trajectories: BTreeMap::from([(TrajectorySource::Groundtruth, traj.clone())]),
        extra: Default::default(),
    })
}

/// Noise-free line-of-sight capture along the standard arc with CFO on:
/// 880 packet pairs.
pub fn standard_fixture() -> DatasetRecord {
    let mut scene = Scene::line_of_sight(Vec3::from(STANDARD_FIXTURE_TX));
    scene.cfo_enabled = true;
    simulated_record(&scene, &standard_trajectory(), STANDARD_PACKET_RATE_HZ)
        .expect("standard fixture scene is valid")
}

/// Resolution / packet-count presets trading accuracy for runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuntimeConfig {
    /// 360x180, every packet.
    Default,
    /// 180x90, every packet.
    LowRes,
    /// 360x180, every other packet.
    Subsample,
    /// 180x90, every other packet.
    LowSub,
}

impl RuntimeConfig {
    pub const ALL: [RuntimeConfig; 4] = [
        RuntimeConfig::Default,
        RuntimeConfig::LowRes,
        RuntimeConfig::Subsample,
        RuntimeConfig::LowSub,
    ];

    pub fn resolution(self) -> Resolution {
        match self {
            RuntimeConfig::Default | RuntimeConfig::Subsample => Resolution {
                azimuth_bins: 360,
                elevation_bins: 180,
            },
            RuntimeConfig::LowRes | RuntimeConfig::LowSub => Resolution {
                azimuth_bins: 180,
                elevation_bins: 90,
            },
        }
    }

    pub fn subsample(self) -> usize {
        match self {
            RuntimeConfig::Default | RuntimeConfig::LowRes => 1,
            RuntimeConfig::Subsample | RuntimeConfig::LowSub => 2,
        }
    }

    pub fn apply(self, mut cfg: EstimateConfig) -> Result<EstimateConfig> {
        cfg.grid = cfg.grid.with_resolution(self.resolution())?;
        cfg.subsample = self.subsample();
        Ok(cfg)
    }

    pub fn name(self) -> &'static str {
        match self {
            RuntimeConfig::Default => "default",
            RuntimeConfig::LowRes => "lowres",
            RuntimeConfig::Subsample => "subsample",
            RuntimeConfig::LowSub => "lowsub",
        }
    }
}

impl FromStr for RuntimeConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuntimeConfig::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown configuration '{s}'")))
    }
}

impl fmt::Display for RuntimeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
