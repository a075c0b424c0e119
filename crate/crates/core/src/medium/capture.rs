//! Co-channel capture: which overlapping signal survives at a receiver.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MediumError, NodeId, Transmission, TxId, TxKind};
use crate::num::Real;
use crate::phy::{self, Micros};

/// Rejection thresholds indexed `[desired SF - 7][interferer SF - 7]`.
///
/// A desired signal is lost when `rssi(IS) - rssi(DS) >= threshold`. Same-SF
/// entries are negative (the desired signal needs a margin to survive), cross-SF
/// entries positive (the interferer must be much stronger).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct CaptureMatrix<T> {
    pub threshold_db: [[T; 6]; 6],
}

/// Co-channel rejection in dB (required SIR), rows desired SF7..12,
/// columns interferer SF7..12, after Goursaud & Gorce.
const REJECTION_DB: [[f64; 6]; 6] = [
    [6.0, -8.0, -9.0, -9.0, -9.0, -9.0],
    [-11.0, 6.0, -11.0, -12.0, -13.0, -13.0],
    [-15.0, -13.0, 6.0, -13.0, -14.0, -15.0],
    [-19.0, -18.0, -17.0, 6.0, -17.0, -18.0],
    [-22.0, -22.0, -21.0, -20.0, 6.0, -20.0],
    [-25.0, -25.0, -25.0, -24.0, -23.0, 6.0],
];

impl<T: Real> CaptureMatrix<T> {
    /// Default matrix: the negated rejection table, so the diagonal is -6 dB.
    pub fn goursaud() -> Self {
        let mut threshold_db = [[T::zero(); 6]; 6];
        for (ds, row) in REJECTION_DB.iter().enumerate() {
            for (is, &rej) in row.iter().enumerate() {
                threshold_db[ds][is] = T::of(-rej);
            }
        }
        Self { threshold_db }
    }

    pub fn uniform(value: T) -> Self {
        Self { threshold_db: [[value; 6]; 6] }
    }

    pub fn threshold(&self, desired_sf: u8, interferer_sf: u8) -> T {
        self.threshold_db[(desired_sf - 7) as usize][(interferer_sf - 7) as usize]
    }

    pub fn set(&mut self, desired_sf: u8, interferer_sf: u8, value: T) -> Result<(), MediumError> {
        if !(7..=12).contains(&desired_sf) || !(7..=12).contains(&interferer_sf) {
            return Err(MediumError::InvalidCapture(format!("SF pair {desired_sf}/{interferer_sf}")));
        }
        if !value.is_finite() {
            return Err(MediumError::InvalidCapture(format!("non-finite threshold for {desired_sf}/{interferer_sf}")));
        }
        self.threshold_db[(desired_sf - 7) as usize][(interferer_sf - 7) as usize] = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), MediumError> {
        if self.threshold_db.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(MediumError::InvalidCapture("non-finite threshold".into()))
        }
    }

    /// Whether `interferer` arriving `diff_db = rssi(IS) - rssi(DS)` above the
    /// desired signal destroys it.
    pub fn kills(&self, desired_sf: u8, interferer_sf: u8, diff_db: T) -> bool {
        diff_db >= self.threshold(desired_sf, interferer_sf)
    }
}

impl<T: Real> Default for CaptureMatrix<T> {
    fn default() -> Self {
        Self::goursaud()
    }
}

/// Received signal strength for every (transmitter, receiver) pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkModel<T> {
    rssi_dbm: BTreeMap<(NodeId, NodeId), T>,
}

impl<T: Real> LinkModel<T> {
    pub fn new() -> Self {
        Self { rssi_dbm: BTreeMap::new() }
    }

    pub fn set(&mut self, from: NodeId, to: NodeId, rssi_dbm: T) {
        self.rssi_dbm.insert((from, to), rssi_dbm);
    }

    pub fn get(&self, from: NodeId, to: NodeId) -> Option<T> {
        self.rssi_dbm.get(&(from, to)).copied()
    }

    pub fn rssi(&self, from: NodeId, to: NodeId) -> Result<T, MediumError> {
        self.get(from, to).ok_or(MediumError::MissingLinkEntry { from, to })
    }

    pub fn contains(&self, from: NodeId, to: NodeId) -> bool {
        self.rssi_dbm.contains_key(&(from, to))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RxStatus {
    Delivered,
    CrcFailed,
    NotHeard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceptionOutcome {
    pub receiver: NodeId,
    pub tx: TxId,
    pub status: RxStatus,
    /// 1-indexed wire byte where corruption starts.
    pub corrupted_from_byte: Option<usize>,
    /// At least one corrupting interferer was a jam transmission.
    pub jammed: bool,
}

impl ReceptionOutcome {
    pub fn not_heard(receiver: NodeId, tx: TxId) -> Self {
        Self { receiver, tx, status: RxStatus::NotHeard, corrupted_from_byte: None, jammed: false }
    }
}

/// First byte of `desired` (1-indexed) whose on-air interval intersects
/// `[from, until)`, or `None` when the span misses the payload entirely.
pub fn first_overlapping_byte(desired: &Transmission, from: Micros, until: Micros) -> Option<usize> {
    let timeline = phy::byte_timeline(&desired.params, desired.wire.len()).ok()?;
    let payload_start = desired.start + phy::preamble_time(&desired.params);
    let lo = from.max(payload_start);
    let hi = until.min(desired.end);
    if lo >= hi {
        return None;
    }
    let idx = timeline.partition_point(|&done| desired.start + done <= lo);
    (idx < timeline.len()).then_some(idx + 1)
}

/// Decides whether `desired` survives `interferers` at `receiver`.
///
/// Each interferer that clears the capture threshold corrupts every payload
/// byte whose interval it overlaps; preamble-only overlap is harmless.
/// Interferers on another channel or disjoint in time are ignored.
pub fn resolve<T: Real>(
    desired: &Transmission,
    interferers: &[&Transmission],
    receiver: NodeId,
    links: &LinkModel<T>,
    capture: &CaptureMatrix<T>,
) -> Result<ReceptionOutcome, MediumError> {
    let ds_rssi = links.rssi(desired.source, receiver)?;
    let ds_sf = desired.params.spreading_factor();
    let mut first: Option<usize> = None;
    let mut jammed = false;
    for is in interferers {
        if is.id == desired.id || is.channel_hz != desired.channel_hz || !is.overlaps(desired) {
            continue;
        }
        let diff = links.rssi(is.source, receiver)? - ds_rssi;
        if !capture.kills(ds_sf, is.params.spreading_factor(), diff) {
            continue;
        }
        if let Some(k) = first_overlapping_byte(desired, is.start, is.end) {
            first = Some(first.map_or(k, |f| f.min(k)));
            jammed |= is.kind == TxKind::Jam;
        }
    }
    Ok(ReceptionOutcome {
        receiver,
        tx: desired.id,
        status: if first.is_some() { RxStatus::CrcFailed } else { RxStatus::Delivered },
        corrupted_from_byte: first,
        jammed,
    })
}
