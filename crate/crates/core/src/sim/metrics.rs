//! Counters collected during a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::actors::{JammerStats, ServerTally, WormholeStats};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub sent: u64,
    /// Heard intact by at least one gateway.
    pub delivered: u64,
    pub crc_failed: u64,
    pub not_heard: u64,
    /// CRC failures with a jam among the corrupting signals.
    pub jammed: u64,
    pub accepted: u64,
    pub reject_mic: u64,
    pub reject_replay: u64,
    /// Replays of this device's frames, by server verdict.
    pub replay_accepted: u64,
    pub replay_rejected: u64,
    pub deferrals: u64,
}

impl DeviceMetrics {
    /// Share of sent frames lost to an adversary, in percent.
    pub fn jam_pct(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            100.0 * self.jammed as f64 / self.sent as f64
        }
    }

    pub fn delivery_pct(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            100.0 * self.delivered as f64 / self.sent as f64
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.sent == self.delivered + self.crc_failed + self.not_heard && self.jammed <= self.crc_failed
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub events: u64,
    pub digest: String,
    pub devices: BTreeMap<String, DeviceMetrics>,
    pub jammers: BTreeMap<String, JammerStats>,
    pub wormholes: BTreeMap<String, WormholeStats>,
    pub server: ServerTally,
}

impl RunMetrics {
    pub fn device(&self, name: &str) -> &DeviceMetrics {
        &self.devices[name]
    }

    /// One CSV row per device.
    pub fn devices_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "device", "sent", "delivered", "crc_failed", "not_heard", "jammed", "jam_pct", "accepted", "reject_mic",
            "reject_replay", "replay_accepted", "replay_rejected", "deferrals",
        ])
        .expect("in-memory write");
        for (name, m) in &self.devices {
            w.write_record([
                name.clone(),
                m.sent.to_string(),
                m.delivered.to_string(),
                m.crc_failed.to_string(),
                m.not_heard.to_string(),
                m.jammed.to_string(),
                format!("{:.2}", m.jam_pct()),
                m.accepted.to_string(),
                m.reject_mic.to_string(),
                m.reject_replay.to_string(),
                m.replay_accepted.to_string(),
                m.replay_rejected.to_string(),
                m.deferrals.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush to vec")).expect("csv is utf-8")
    }
}
