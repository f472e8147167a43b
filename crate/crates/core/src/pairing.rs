//! Packet pairing, CFO cancellation and trajectory alignment.
//!
//! Forward packets travel from the transmitter `j` to the moving receiver
//! `i`; reverse packets travel from `i` back to `j`. Both carry a shared
//! counter (the responder echoes the initiator's counter), so pairing keys
//! on counters only and needs no clock synchronisation between agents.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AgentId, CsiPacket, PhaseFactor, Trajectory, Vec3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExchangeLog {
    /// Packets sent by the transmitter and measured at the receiver.
    pub forward: Vec<CsiPacket>,
    /// Packets sent by the receiver and measured at the transmitter.
    pub reverse: Vec<CsiPacket>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingStats {
    pub forward: usize,
    pub reverse: usize,
    pub paired: usize,
    /// `min(forward, reverse) - paired`.
    pub dropped: usize,
    /// Pairs discarded because their timestamp fell outside the trajectory.
    pub out_of_span: usize,
}

impl PairingStats {
    pub fn accounting_holds(&self) -> bool {
        self.paired + self.dropped == self.forward.min(self.reverse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEntry {
    pub t: f64,
    pub position: Vec3,
    pub h: Complex64,
}

/// Channel sequence aligned with receiver displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedChannel {
    pub entries: Vec<ChannelEntry>,
    pub stats: PairingStats,
}

impl PairedChannel {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.entries.iter().map(|e| e.position).collect()
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.h).collect()
    }

    /// Keeps every `step`-th entry starting from the first.
    pub fn subsample(&self, step: usize) -> Self {
        let step = step.max(1);
        Self {
            entries: self.entries.iter().step_by(step).copied().collect(),
            stats: self.stats,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| ChannelEntry { h: e.h * c, ..*e })
                .collect(),
            stats: self.stats,
        }
    }
}

fn check_stream(name: &str, packets: &[CsiPacket]) -> Result<()> {
    for w in packets.windows(2) {
        if w[1].counter == w[0].counter {
            return Err(Error::MalformedLog(format!(
                "duplicate counter {} in {name} stream",
                w[0].counter
            )));
        }
        if w[1].counter < w[0].counter {
            return Err(Error::MalformedLog(format!(
                "{name} stream not sorted by counter ({} after {})",
                w[1].counter, w[0].counter
            )));
        }
    }
    Ok(())
}

/// Greedy in-order matching of forward and reverse packets by counter.
///
/// Two cursors walk both streams; packets whose counters differ by at most
/// `max_counter_skew` are paired, otherwise the cursor with the smaller
/// counter advances. For sorted streams this yields a maximum non-crossing
/// matching.
pub fn pair_packets(
    log: &ExchangeLog,
    max_counter_skew: u64,
) -> Result<Vec<(CsiPacket, CsiPacket)>> {
    check_stream("forward", &log.forward)?;
    check_stream("reverse", &log.reverse)?;

    let mut pairs = Vec::with_capacity(log.forward.len().min(log.reverse.len()));
    let (mut i, mut j) = (0, 0);
    while i < log.forward.len() && j < log.reverse.len() {
        let f = log.forward[i];
        let r = log.reverse[j];
        if f.counter.abs_diff(r.counter) <= max_counter_skew {
            pairs.push((f, r));
            i += 1;
            j += 1;
        } else if f.counter < r.counter {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(pairs)
}

/// Multiplies forward and reverse channels of each pair.
///
/// An oscillator offset adds `+ε` to one direction and `-ε` to the other,
/// so the product is offset-free while the geometric phase doubles; the
/// result must be steered with [`PhaseFactor::RoundTrip`].
pub fn cancel_cfo(pairs: &[(CsiPacket, CsiPacket)]) -> Result<Vec<Complex64>> {
    if pairs.is_empty() {
        return Err(Error::invalid("no packet pairs to cancel"));
    }
    let bad: Vec<u64> = pairs
        .iter()
        .filter(|(f, r)| !f.is_valid() || !r.is_valid())
        .map(|(f, _)| f.counter)
        .collect();
    if !bad.is_empty() {
        return Err(Error::DegenerateChannel { counters: bad });
    }
    Ok(pairs.iter().map(|(f, r)| f.channel * r.channel).collect())
}

/// Attaches an interpolated receiver position to each channel value.
/// Values stamped outside the trajectory span are dropped and counted.
pub fn align_to_trajectory(
    h: &[Complex64],
    pair_timestamps: &[f64],
    traj: &Trajectory,
) -> Result<PairedChannel> {
    if traj.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    if h.len() != pair_timestamps.len() {
        return Err(Error::invalid(format!(
            "{} channel values but {} timestamps",
            h.len(),
            pair_timestamps.len()
        )));
    }
    let mut entries: Vec<ChannelEntry> = h
        .iter()
        .zip(pair_timestamps)
        .filter_map(|(&h, &t)| {
            traj.position_at(t)
                .map(|position| ChannelEntry { t, position, h })
        })
        .collect();
    entries.sort_by(|a, b| a.t.total_cmp(&b.t));
    let out_of_span = h.len() - entries.len();
    Ok(PairedChannel {
        entries,
        stats: PairingStats {
            paired: h.len(),
            out_of_span,
            ..PairingStats::default()
        },
    })
}

/// Full channel-processing step: pair, derive the channel sequence for the
/// requested phase factor, and align it to the trajectory.
///
/// Round-trip uses the forward × reverse product; single-trip uses the
/// forward channel of each pair as-is.
pub fn build_channel(
    log: &ExchangeLog,
    traj: &Trajectory,
    phase_factor: PhaseFactor,
    max_counter_skew: u64,
) -> Result<PairedChannel> {
    let pairs = pair_packets(log, max_counter_skew)?;
    if pairs.is_empty() {
        return Err(Error::invalid("no forward/reverse packets could be paired"));
    }
    let h = match phase_factor {
        PhaseFactor::RoundTrip => cancel_cfo(&pairs)?,
        PhaseFactor::SingleTrip => pairs.iter().map(|(f, _)| f.channel).collect(),
    };
    let times: Vec<f64> = pairs.iter().map(|(f, _)| f.timestamp).collect();
    let mut channel = align_to_trajectory(&h, &times, traj)?;
    channel.stats.forward = log.forward.len();
    channel.stats.reverse = log.reverse.len();
    channel.stats.dropped = log.forward.len().min(log.reverse.len()) - pairs.len();
    Ok(channel)
}

/// Transmission order for one initiator and its responders: the initiator
/// broadcasts, then each responder replies in turn, for `n_rounds` rounds.
pub fn round_robin_schedule(
    initiator: AgentId,
    responders: &[AgentId],
    n_rounds: usize,
) -> Result<Vec<AgentId>> {
    if responders.is_empty() {
        return Err(Error::invalid("round-robin schedule needs at least one responder"));
    }
    let mut seen = HashSet::new();
    for r in responders {
        if *r == initiator {
            return Err(Error::invalid(format!("agent {r} cannot respond to itself")));
        }
        if !seen.insert(*r) {
            return Err(Error::invalid(format!("duplicate responder {r}")));
        }
    }
    let round = std::iter::once(initiator).chain(responders.iter().copied());
    Ok(round.cycle().take((responders.len() + 1) * n_rounds).collect())
}
