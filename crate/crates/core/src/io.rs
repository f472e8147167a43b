//! File formats: capture records, scenes, trajectories, bearing lists and
//! profile exports.
//!
//! A capture record is a JSON document:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "meta": { "rx_id": 0, "tx_id": 1, "tx_position": [4.0, 2.0, 0.0],
//!             "rx_label": "grid-3", "environment": "NLOS", "wavelength_m": 0.0579 },
//!   "packets": {
//!     "forward": [ { "counter": 1, "t": 0.0025, "re": 0.1, "im": -0.2,
//!                    "sender": 1, "receiver": 0 } ],
//!     "reverse": [ ... ]
//!   },
//!   "trajectories": {
//!     "groundtruth": [ { "t": 0.0, "x": 0.0, "y": 0.0, "z": 0.0 } ],
//!     "tracking_camera": [ ... ],
//!     "wheel_odometry": [ ... ]
//!   }
//! }
//! ```
//!
//! Forward packets are sent by the transmitter and measured by the
//! receiver; reverse packets go the other way. A packet may carry
//! per-subcarrier values as `"csi": [[re, im], ...]` instead of `re`/`im`;
//! the center subcarrier is used. Trajectories are rebased so their first
//! sample is the origin. Unknown top-level and `meta` fields are kept and
//! written back unchanged.
//!
//! Angles are degrees in every file and radians in memory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
#[cfg(test)]
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::localization::BearingObservation;
use crate::pairing::ExchangeLog;
use crate::profile::{AoaProfile, BearingEstimate, Peak};
use crate::sim::Scene;
use crate::steering::build_grid;
use crate::types::{
    AgentId, CsiPacket, GridConfig, PhaseFactor, Trajectory, TrajectorySample, Vec3,
    DEFAULT_WAVELENGTH_M,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const PROFILE_CSV: &str = "profile.csv";
pub const METRICS_JSON: &str = "metrics.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Groundtruth,
    TrackingCamera,
    WheelOdometry,
}

impl TrajectorySource {
    pub fn key(self) -> &'static str {
        match self {
            TrajectorySource::Groundtruth => "groundtruth",
            TrajectorySource::TrackingCamera => "tracking_camera",
            TrajectorySource::WheelOdometry => "wheel_odometry",
        }
    }
}

impl FromStr for TrajectorySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "groundtruth" => Ok(TrajectorySource::Groundtruth),
            "camera" | "tracking_camera" => Ok(TrajectorySource::TrackingCamera),
            "odometry" | "wheel_odometry" => Ok(TrajectorySource::WheelOdometry),
            other => Err(Error::invalid(format!("unknown trajectory source '{other}'"))),
        }
    }
}

impl fmt::Display for TrajectorySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Environment {
    Los,
    Nlos,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub rx_id: AgentId,
    pub tx_id: AgentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub meta: RecordMeta,
    pub log: ExchangeLog,
    pub trajectories: BTreeMap<TrajectorySource, Trajectory>,
    pub extra: Map<String, Value>,
}

impl DatasetRecord {
    pub fn trajectory(&self, source: TrajectorySource) -> Result<&Trajectory> {
        self.trajectories
            .get(&source)
            .ok_or_else(|| Error::invalid(format!("record has no {source} trajectory")))
    }

    pub fn tx_position(&self) -> Option<Vec3> {
        self.meta.tx_position.map(|p| Vec3::new(p[0], p[1], p[2]))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPacket {
    counter: u64,
    t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    csi: Option<Vec<[f64; 2]>>,
    sender: AgentId,
    receiver: AgentId,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawSample {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawStreams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    forward: Option<Vec<RawPacket>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reverse: Option<Vec<RawPacket>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    schema_version: u32,
    meta: RecordMeta,
    #[serde(default)]
    packets: RawStreams,
    #[serde(default)]
    trajectories: BTreeMap<TrajectorySource, Vec<RawSample>>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

/// Converts a foreign capture layout into the canonical record document.
///
/// Released datasets from other tools use their own field names; an
/// adapter maps them onto the schema above before validation.
pub trait RecordAdapter {
    fn to_canonical(&self, raw: Value) -> Result<Value>;
}

/// Identity adapter for files already in the canonical schema.
#[derive(Debug, Clone, Copy, Default)]
pub struct CanonicalAdapter;

impl RecordAdapter for CanonicalAdapter {
    fn to_canonical(&self, raw: Value) -> Result<Value> {
        Ok(raw)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn validation_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Validation {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Deserializes JSON text, reporting the failing field path and location.
fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            parse_error(path, inner.to_string())
        } else {
            parse_error(path, format!("field `{field}`: {inner}"))
        }
    })
}

fn from_value<T: DeserializeOwned>(path: &Path, value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        parse_error(path, format!("field `{field}`: {}", e.into_inner()))
    })
}

pub fn load_record(path: impl AsRef<Path>) -> Result<DatasetRecord> {
    let path = path.as_ref();
    let raw: RawRecord = parse_json(path, &read_text(path)?)?;
    validate_record(path, raw)
}

pub fn load_record_with(path: impl AsRef<Path>, adapter: &dyn RecordAdapter) -> Result<DatasetRecord> {
    let path = path.as_ref();
    let value: Value = parse_json(path, &read_text(path)?)?;
    let raw: RawRecord = from_value(path, adapter.to_canonical(value)?)?;
    validate_record(path, raw)
}

fn convert_stream(
    path: &Path,
    name: &str,
    stream: Option<Vec<RawPacket>>,
    sender: AgentId,
    receiver: AgentId,
) -> Result<Vec<CsiPacket>> {
    let stream = stream.ok_or_else(|| validation_error(path, format!("{name} stream absent")))?;
    let mut out = Vec::with_capacity(stream.len());
    for (i, p) in stream.into_iter().enumerate() {
        let channel = match (&p.csi, p.re, p.im) {
            (Some(sub), _, _) if !sub.is_empty() => {
                let [re, im] = sub[sub.len() / 2];
                Complex64::new(re, im)
            }
            (_, Some(re), Some(im)) => Complex64::new(re, im),
            _ => {
                return Err(validation_error(
                    path,
                    format!("{name}[{i}]: packet has neither re/im nor csi values"),
                ))
            }
        };
        if !p.t.is_finite() || !channel.re.is_finite() || !channel.im.is_finite() {
            return Err(validation_error(path, format!("{name}[{i}]: non-finite value")));
        }
        if p.sender != sender || p.receiver != receiver {
            return Err(validation_error(
                path,
                format!(
                    "{name}[{i}]: sender/receiver {}/{} do not match meta ({sender}/{receiver})",
                    p.sender, p.receiver
                ),
            ));
        }
        if let Some(prev) = out.last().map(|q: &CsiPacket| q.counter) {
            if p.counter <= prev {
                return Err(validation_error(
                    path,
                    format!("{name}[{i}]: counter {} not increasing (previous {prev})", p.counter),
                ));
            }
        }
        out.push(CsiPacket {
            sender: p.sender,
            receiver: p.receiver,
            counter: p.counter,
            timestamp: p.t,
            channel,
        });
    }
    Ok(out)
}

fn validate_record(path: &Path, raw: RawRecord) -> Result<DatasetRecord> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(validation_error(
            path,
            format!("unsupported schema_version {}", raw.schema_version),
        ));
    }
    let meta = raw.meta;
    if meta.rx_id == meta.tx_id {
        return Err(validation_error(path, "meta: rx_id equals tx_id"));
    }
    if !(meta.wavelength_m > 0.0) {
        return Err(validation_error(path, "meta: wavelength_m must be positive"));
    }
    let forward = convert_stream(path, "forward", raw.packets.forward, meta.tx_id, meta.rx_id)?;
    let reverse = convert_stream(path, "reverse", raw.packets.reverse, meta.rx_id, meta.tx_id)?;
    if raw.trajectories.is_empty() {
        return Err(validation_error(path, "no trajectory present"));
    }
    let mut trajectories = BTreeMap::new();
    for (source, samples) in raw.trajectories {
        let samples = samples
            .into_iter()
            .map(|s| TrajectorySample {
                t: s.t,
                position: Vec3::new(s.x, s.y, s.z),
            })
            .collect();
        let traj = Trajectory::rebased(samples)
            .map_err(|e| validation_error(path, format!("trajectory {source}: {e}")))?;
        trajectories.insert(source, traj);
    }
    Ok(DatasetRecord {
        meta,
        log: ExchangeLog { forward, reverse },
        trajectories,
        extra: raw.extra,
    })
}

fn raw_stream(packets: &[CsiPacket]) -> Vec<RawPacket> {
    packets
        .iter()
        .map(|p| RawPacket {
            counter: p.counter,
            t: p.timestamp,
            re: Some(p.channel.re),
            im: Some(p.channel.im),
            csi: None,
            sender: p.sender,
            receiver: p.receiver,
        })
        .collect()
}

fn raw_samples(traj: &Trajectory) -> Vec<RawSample> {
    traj.samples()
        .iter()
        .map(|s| RawSample {
            t: s.t,
            x: s.position.x,
            y: s.position.y,
            z: s.position.z,
        })
        .collect()
}

pub fn save_record(record: &DatasetRecord, path: impl AsRef<Path>) -> Result<()> {
    let raw = RawRecord {
        schema_version: SCHEMA_VERSION,
        meta: record.meta.clone(),
        packets: RawStreams {
            forward: Some(raw_stream(&record.log.forward)),
            reverse: Some(raw_stream(&record.log.reverse)),
        },
        trajectories: record
            .trajectories
            .iter()
            .map(|(k, t)| (*k, raw_samples(t)))
            .collect(),
        extra: record.extra.clone(),
    };
    write_json(path.as_ref(), &raw)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| validation_error(path, format!("serialization failed: {e}")))?;
    write_text(path, &(text + "\n"))
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let scene: Scene = parse_json(path, &read_text(path)?)?;
    scene
        .validate()
        .map_err(|e| validation_error(path, e.to_string()))?;
    Ok(scene)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    write_json(path.as_ref(), scene)
}

/// Trajectory file: a JSON array of `{t, x, y, z}` samples.
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let raw: Vec<RawSample> = parse_json(path, &read_text(path)?)?;
    let samples = raw
        .into_iter()
        .map(|s| TrajectorySample {
            t: s.t,
            position: Vec3::new(s.x, s.y, s.z),
        })
        .collect();
    Trajectory::rebased(samples).map_err(|e| validation_error(path, e.to_string()))
}

pub fn save_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    write_json(path.as_ref(), &raw_samples(traj))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BearingRow {
    anchor_x: f64,
    anchor_y: f64,
    bearing_deg: f64,
    variance: f64,
}

/// Bearing list: CSV with header `anchor_x,anchor_y,bearing_deg,variance`.
/// Each row is a ray from the anchor toward the agent being localized.
pub fn load_bearings(path: impl AsRef<Path>) -> Result<Vec<BearingObservation>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<BearingRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let obs = BearingObservation::new(
            Vector2::new(row.anchor_x, row.anchor_y),
            row.bearing_deg.to_radians(),
            row.variance,
        )
        .map_err(|e| validation_error(path, e.to_string()))?;
        out.push(obs);
    }
    Ok(out)
}

pub fn save_bearings(observations: &[BearingObservation], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for o in observations {
        writer
            .serialize(BearingRow {
                anchor_x: o.anchor.x,
                anchor_y: o.anchor.y,
                bearing_deg: o.bearing_rad.to_degrees(),
                variance: o.variance,
            })
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        parse_error(path, e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub rank: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub magnitude: f64,
}

impl From<&Peak> for PeakRecord {
    fn from(p: &Peak) -> Self {
        Self {
            rank: p.rank,
            azimuth_deg: p.direction.azimuth_deg(),
            elevation_deg: p.direction.elevation_deg(),
            magnitude: p.magnitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub azimuth_bins: usize,
    pub elevation_bins: usize,
    pub wavelength_m: f64,
    pub phase_factor: PhaseFactor,
}

/// Scalar outputs stored next to an exported profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMetrics {
    pub aoa_max: PeakRecord,
    pub top_n: Vec<PeakRecord>,
    pub variance: f64,
    pub accepted: bool,
    pub n_packets_used: usize,
    pub compute_time_s: f64,
    pub grid: GridRecord,
}

impl ProfileMetrics {
    pub fn new(profile: &AoaProfile, est: &BearingEstimate) -> Self {
        let cfg = profile.grid().config();
        Self {
            aoa_max: PeakRecord::from(&est.aoa_max),
            top_n: est.top_n.iter().map(PeakRecord::from).collect(),
            variance: est.variance,
            accepted: est.accepted,
            n_packets_used: est.n_packets_used,
            compute_time_s: est.compute_time_s,
            grid: GridRecord {
                azimuth_bins: cfg.azimuth_bins,
                elevation_bins: cfg.elevation_bins,
                wavelength_m: cfg.wavelength_m,
                phase_factor: cfg.phase_factor,
            },
        }
    }
}

/// Writes `profile.csv` and `metrics.json` into `dir`, creating it if
/// needed. The CSV header lists azimuth bin centers in degrees and each row
/// holds one elevation bin, from the +z pole downward.
pub fn export_profile(profile: &AoaProfile, est: &BearingEstimate, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(PROFILE_CSV);
    let mut writer = csv::Writer::from_path(&csv_path).map_err(|e| csv_error(&csv_path, e))?;
    let header: Vec<String> = profile
        .grid()
        .azimuth_centers_rad()
        .iter()
        .map(|a| format!("{:.6}", a.to_degrees()))
        .collect();
    writer.write_record(&header).map_err(|e| csv_error(&csv_path, e))?;
    for e in 0..profile.grid().elevation_bins() {
        writer
            .write_record(profile.row(e).iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(&csv_path, e))?;
    }
    writer.flush().map_err(|e| Error::io(&csv_path, e))?;
    write_json(&dir.join(METRICS_JSON), &ProfileMetrics::new(profile, est))
}

/// Reads back a profile written by [`export_profile`].
pub fn import_profile(dir: impl AsRef<Path>) -> Result<(AoaProfile, ProfileMetrics)> {
    let dir = dir.as_ref();
    let metrics_path = dir.join(METRICS_JSON);
    let metrics: ProfileMetrics = parse_json(&metrics_path, &read_text(&metrics_path)?)?;
    let g = metrics.grid;
    let cfg = GridConfig::new(g.azimuth_bins, g.elevation_bins, g.wavelength_m, g.phase_factor)
        .map_err(|e| validation_error(&metrics_path, e.to_string()))?;
    let grid = Arc::new(build_grid(cfg)?);

    let csv_path = dir.join(PROFILE_CSV);
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| csv_error(&csv_path, e))?;
    let width = reader.headers().map_err(|e| csv_error(&csv_path, e))?.len();
    if width != g.azimuth_bins {
        return Err(validation_error(
            &csv_path,
            format!("{width} columns, expected {}", g.azimuth_bins),
        ));
    }
    let mut magnitudes = Vec::with_capacity(grid.len());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(&csv_path, e))?;
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_error(&csv_path, format!("row {}, column {}: '{field}' is not a number", row + 2, col + 1))
            })?;
            magnitudes.push(v);
        }
    }
    let mut profile = AoaProfile::from_magnitudes(grid, magnitudes)
        .map_err(|e| validation_error(&csv_path, e.to_string()))?;
    profile.n_packets_used = metrics.n_packets_used;
    profile.compute_time_s = metrics.compute_time_s;
    Ok((profile, metrics))
}
