//! Bartlett angle-of-arrival profile and the statistics derived from it.
//!
//! For every grid direction the channel samples are phase-aligned with the
//! steering phases and summed coherently; the squared magnitude of the sum
//! is the profile value. The strongest cell is the bearing estimate, the
//! profile variance scores how concentrated the energy is around it, and
//! the top-N peaks report distinct secondary paths.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairing::PairedChannel;
use crate::parallel::Parallelism;
use crate::steering::{phase_scale, steering_phase, DirectionGrid, SteeringTable};
use crate::types::{azimuth_distance, wrap_unchecked, Direction};

/// Relative margin under which two profile values count as tied for the
/// maximum.
pub const ARGMAX_TIE_RTOL: f64 = 1e-9;

/// Squared-magnitude map over an elevation-major direction grid.
#[derive(Debug, Clone)]
pub struct AoaProfile {
    magnitudes: Vec<f64>,
    grid: Arc<DirectionGrid>,
    pub n_packets_used: usize,
    pub compute_time_s: f64,
}

impl AoaProfile {
    /// Wraps precomputed magnitudes, e.g. from an exported profile.
    pub fn from_magnitudes(grid: Arc<DirectionGrid>, magnitudes: Vec<f64>) -> Result<Self> {
        if magnitudes.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} magnitudes for a grid of {} cells",
                magnitudes.len(),
                grid.len()
            )));
        }
        if let Some(i) = magnitudes.iter().position(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::invalid(format!(
                "profile cell {i} is negative or non-finite"
            )));
        }
        Ok(Self {
            magnitudes,
            grid,
            n_packets_used: 0,
            compute_time_s: 0.0,
        })
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    /// Row `elevation_bin` of the profile, one value per azimuth bin.
    pub fn row(&self, elevation_bin: usize) -> &[f64] {
        let a = self.grid.azimuth_bins();
        &self.magnitudes[elevation_bin * a..(elevation_bin + 1) * a]
    }

    /// Index of the strongest cell. Cells within `ARGMAX_TIE_RTOL` of the
    /// maximum count as tied and the lowest index wins, so mirror-symmetric
    /// apertures pick the same cell regardless of rounding.
    pub fn argmax(&self) -> usize {
        let max = self.magnitudes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let floor = max - ARGMAX_TIE_RTOL * max.abs();
        self.magnitudes.iter().position(|&m| m >= floor).unwrap_or(0)
    }

    pub fn max(&self) -> f64 {
        self.magnitudes[self.argmax()]
    }

    pub fn direction(&self, cell: usize) -> Direction {
        self.grid.directions()[cell]
    }
}

pub fn compute_profile(channel: &PairedChannel, table: &SteeringTable) -> Result<AoaProfile> {
    compute_profile_with(channel, table, Parallelism::default())
}

/// Evaluates the profile from a precomputed steering table.
///
/// Cells are distributed across threads; each cell's sum runs sequentially
/// in packet order, so the output is bit-identical for any thread count.
pub fn compute_profile_with(
    channel: &PairedChannel,
    table: &SteeringTable,
    parallelism: Parallelism,
) -> Result<AoaProfile> {
    let m = channel.len();
    if m != table.n_samples() {
        return Err(Error::invalid(format!(
            "channel has {m} entries but steering table has {} samples",
            table.n_samples()
        )));
    }
    if m < 2 {
        return Err(Error::invalid("profile needs at least 2 channel samples"));
    }
    let start = Instant::now();
    let h = channel.values();
    let mut magnitudes = vec![0.0; table.n_cells()];
    parallelism.fill_chunks(&mut magnitudes, CELL_CHUNK, |chunk, out| {
        let first = chunk * CELL_CHUNK;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = correlate(&h, table.cell_phases(first + k).iter().copied());
        }
    });
    Ok(AoaProfile {
        magnitudes,
        grid: Arc::clone(table.grid()),
        n_packets_used: m,
        compute_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Same result as [`compute_profile_with`] but computes steering phases on
/// the fly instead of reading a table.
pub fn compute_profile_fused(
    channel: &PairedChannel,
    grid: &Arc<DirectionGrid>,
    parallelism: Parallelism,
) -> Result<AoaProfile> {
    let m = channel.len();
    if m < 2 {
        return Err(Error::invalid("profile needs at least 2 channel samples"));
    }
    let start = Instant::now();
    let h = channel.values();
    let positions = channel.positions();
    let scale = phase_scale(grid.config());
    let units = grid.unit_vectors();
    let mut magnitudes = vec![0.0; grid.len()];
    parallelism.fill_chunks(&mut magnitudes, CELL_CHUNK, |chunk, out| {
        let first = chunk * CELL_CHUNK;
        for (k, slot) in out.iter_mut().enumerate() {
            let u = &units[first + k];
            *slot = correlate(&h, positions.iter().map(|d| steering_phase(scale, u, d)));
        }
    });
    Ok(AoaProfile {
        magnitudes,
        grid: Arc::clone(grid),
        n_packets_used: m,
        compute_time_s: start.elapsed().as_secs_f64(),
    })
}

const CELL_CHUNK: usize = 64;

/// `|Σ h_m · e^{-j·phase_m}|²`
#[inline]
fn correlate(h: &[Complex64], phases: impl Iterator<Item = f64>) -> f64 {
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for (hm, phase) in h.iter().zip(phases) {
        let (s, c) = phase.sin_cos();
        re += hm.re * c + hm.im * s;
        im += hm.im * c - hm.re * s;
    }
    re * re + im * im
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceForm {
    /// Scaled so that a uniform profile scores exactly 1.
    #[default]
    Normalized,
    /// The unnormalized ratio, which scores `1 / F` for a uniform profile
    /// of total mass `F`. Kept for comparison with older outputs.
    Literal,
}

pub fn profile_variance(p: &AoaProfile) -> Result<f64> {
    profile_variance_with(p, VarianceForm::Normalized)
}

/// Spread of profile mass around the strongest cell.
///
/// With `Ψ_c = wrap(φ_c − φ_max)² + (θ_c − θ_max)²`, the normalized form is
/// `(Σ Ψ_c f_c / F) / (Σ Ψ_c / A)` where `F` is the total mass and `A` the
/// cell count: the Ψ-weighted mean of the profile relative to a flat one.
/// Near 0 for a single sharp peak, near 1 for noise, above 1 when strong
/// energy sits far from the maximum.
pub fn profile_variance_with(p: &AoaProfile, form: VarianceForm) -> Result<f64> {
    let f = p.magnitudes();
    let total: f64 = f.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateProfile("all-zero profile".into()));
    }
    let dirs = p.grid().directions();
    let peak = dirs[p.argmax()];
    let (mut weighted, mut psi_sum) = (0.0, 0.0);
    for (d, &fc) in dirs.iter().zip(f) {
        let daz = wrap_unchecked(d.azimuth_rad() - peak.azimuth_rad());
        let del = d.elevation_rad() - peak.elevation_rad();
        let psi = daz * daz + del * del;
        weighted += psi * fc;
        psi_sum += psi;
    }
    if !(psi_sum > 0.0) {
        return Err(Error::DegenerateProfile(
            "grid has no angular spread around the maximum".into(),
        ));
    }
    let cells = f.len() as f64;
    Ok(match form {
        VarianceForm::Normalized => (weighted * cells) / (total * psi_sum),
        VarianceForm::Literal => (weighted / total) / (total * psi_sum / cells),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub direction: Direction,
    pub magnitude: f64,
    /// 1-based; rank 1 is the global maximum.
    pub rank: usize,
    pub cell: usize,
}

/// True when `cell` beats all 8 neighbours. Azimuth wraps; elevation edges
/// are clamped. Equal neighbours are resolved in favour of the lower index
/// so plateaus yield exactly one candidate.
fn is_local_max(p: &AoaProfile, cell: usize) -> bool {
    let grid = p.grid();
    let (a_bins, e_bins) = (grid.azimuth_bins(), grid.elevation_bins());
    let (e, a) = grid.bins(cell);
    let f = p.magnitudes();
    let fc = f[cell];
    for de in [-1isize, 0, 1] {
        let ne = e as isize + de;
        if ne < 0 || ne >= e_bins as isize {
            continue;
        }
        for da in [a_bins - 1, 0, 1] {
            if de == 0 && da == 0 {
                continue;
            }
            let nb = grid.index(ne as usize, (a + da) % a_bins);
            let fn_ = f[nb];
            if fn_ > fc || (fn_ == fc && nb < cell) {
                return false;
            }
        }
    }
    true
}

const SEPARATION_EPS_DEG: f64 = 1e-9;

fn too_close(a: &Direction, b: &Direction, alpha_deg: f64) -> bool {
    let daz = azimuth_distance(a.azimuth_rad(), b.azimuth_rad()).to_degrees();
    let del = (a.elevation_rad() - b.elevation_rad()).abs().to_degrees();
    let limit = alpha_deg - SEPARATION_EPS_DEG;
    daz < limit && del < limit
}

/// Up to `n` distinct peaks in descending magnitude.
///
/// Candidates are local maxima carrying at least `k_percent` of the global
/// maximum. A candidate is skipped when it lies within `alpha_deg` of an
/// already selected peak in azimuth and elevation at the same time.
pub fn find_peaks(p: &AoaProfile, n: usize, k_percent: f64, alpha_deg: f64) -> Vec<Peak> {
    let max = p.max();
    if n == 0 || !(max > 0.0) {
        return Vec::new();
    }
    let floor = k_percent / 100.0 * max;
    let f = p.magnitudes();
    let mut candidates: Vec<usize> = (0..f.len())
        .filter(|&c| f[c] >= floor && is_local_max(p, c))
        .collect();
    candidates.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    // The global argmax leads even when a near-tie sorts ahead of it.
    let top = p.argmax();
    if let Some(i) = candidates.iter().position(|&c| c == top) {
        candidates[..=i].rotate_right(1);
    }

    let mut peaks: Vec<Peak> = Vec::with_capacity(n);
    for c in candidates {
        let dir = p.direction(c);
        if peaks.iter().any(|pk| too_close(&pk.direction, &dir, alpha_deg)) {
            continue;
        }
        peaks.push(Peak {
            direction: dir,
            magnitude: f[c],
            rank: peaks.len() + 1,
            cell: c,
        });
        if peaks.len() == n {
            break;
        }
    }
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingOptions {
    pub top_n: usize,
    pub k_percent: f64,
    pub alpha_deg: f64,
    /// Rejection threshold on profile variance.
    pub tau: f64,
    pub variance_form: VarianceForm,
}

impl Default for BearingOptions {
    fn default() -> Self {
        Self {
            top_n: 4,
            k_percent: 40.0,
            alpha_deg: 10.0,
            tau: 0.9,
            variance_form: VarianceForm::Normalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BearingEstimate {
    pub aoa_max: Peak,
    pub top_n: Vec<Peak>,
    pub variance: f64,
    pub accepted: bool,
    pub n_packets_used: usize,
    pub compute_time_s: f64,
}

pub fn analyze_profile(p: &AoaProfile, opts: &BearingOptions) -> Result<BearingEstimate> {
    let variance = profile_variance_with(p, opts.variance_form)?;
    let cell = p.argmax();
    let aoa_max = Peak {
        direction: p.direction(cell),
        magnitude: p.magnitudes()[cell],
        rank: 1,
        cell,
    };
    Ok(BearingEstimate {
        aoa_max,
        top_n: find_peaks(p, opts.top_n, opts.k_percent, opts.alpha_deg),
        variance,
        accepted: variance <= opts.tau,
        n_packets_used: p.n_packets_used,
        compute_time_s: p.compute_time_s,
    })
}

pub fn estimate_bearing(
    channel: &PairedChannel,
    table: &SteeringTable,
    opts: &BearingOptions,
) -> Result<BearingEstimate> {
    let profile = compute_profile(channel, table)?;
    analyze_profile(&profile, opts)
}
