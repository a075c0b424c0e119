//! Adversaries. A [`Jammer`] listens and transmits from one node, either on
//! every preamble it hears (triggered) or after reading a header prefix and
//! consulting a policy (selective). A [`Wormhole`] splits the job: a sniffer
//! near the victim decides and records, a jammer near the gateway transmits
//! after a link delay and later replays what the sniffer stored.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::policy::CompiledPolicy;
use crate::codec::{decode_prefix, DevAddr, WireFrame};
use crate::medium::{NodeId, Transmission, TxId, TxKind};
use crate::phy::{self, LatencyModel, Micros, RadioParams};

/// What an adversary listens to and when it is switched on.
#[derive(Debug, Clone, PartialEq)]
pub struct Listen {
    pub channels: Vec<u32>,
    /// Empty means every spreading factor.
    pub sfs: Vec<u8>,
    /// Probability that a preamble on a listened channel goes unnoticed.
    pub detection_miss: f64,
    pub active_from: Micros,
    pub active_until: Option<Micros>,
}

impl Listen {
    pub fn channel(channel_hz: u32) -> Self {
        Self { channels: vec![channel_hz], sfs: Vec::new(), detection_miss: 0.0, active_from: Micros::ZERO, active_until: None }
    }

    fn hears<R: RngCore>(&self, tx: &Transmission, now: Micros, rng: &mut R) -> Hearing {
        if tx.kind == TxKind::Jam
            || now < self.active_from
            || self.active_until.is_some_and(|u| now >= u)
            || !self.channels.contains(&tx.channel_hz)
            || !(self.sfs.is_empty() || self.sfs.contains(&tx.params.spreading_factor()))
        {
            return Hearing::Deaf;
        }
        if self.detection_miss > 0.0 && rng.random::<f64>() < self.detection_miss {
            return Hearing::Missed;
        }
        Hearing::Heard
    }
}

enum Hearing {
    Deaf,
    Missed,
    Heard,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JamMode {
    /// Jam `detect_delay_symbols` victim symbols after the frame starts.
    Triggered { detect_delay_symbols: u32 },
    /// Decide once the policy's prefix is in, then switch to transmit.
    Selective { policy: CompiledPolicy, decision_delay: Micros, turnaround_symbols: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JammerConfig {
    pub node: NodeId,
    pub listen: Listen,
    pub mode: JamMode,
    pub jam_bytes: usize,
    pub tx_power_dbm: f64,
    /// Idle time after a jam before the radio listens again.
    pub rearm: Micros,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JammerStats {
    pub heard: u64,
    pub missed: u64,
    pub busy: u64,
    pub matched: u64,
    pub jams: u64,
}

/// Next thing the engine should do for a jammer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reaction {
    /// Fire a jam against `victim` at the given instant.
    JamAt(Micros),
    /// Call [`Jammer::decide`] at the given instant.
    DecideAt(Micros),
}

#[derive(Debug, Clone)]
pub struct Jammer {
    cfg: JammerConfig,
    ready_at: Micros,
    stats: JammerStats,
}

/// Airtime of a jam burst of `bytes` at the victim's settings.
pub fn jam_airtime(params: &RadioParams, bytes: usize) -> Micros {
    phy::time_on_air(params, bytes.clamp(1, params.max_frame_size())).expect("clamped to the valid range")
}

/// Random burst bytes carried by a jam transmission.
pub fn jam_wire<R: RngCore>(params: &RadioParams, bytes: usize, rng: &mut R) -> WireFrame {
    let mut b = vec![0; bytes.clamp(1, params.max_frame_size())];
    rng.fill_bytes(&mut b);
    WireFrame::new(b)
}

impl Jammer {
    pub fn new(cfg: JammerConfig) -> Self {
        Self { cfg, ready_at: Micros::ZERO, stats: JammerStats::default() }
    }

    pub fn config(&self) -> &JammerConfig {
        &self.cfg
    }

    pub fn stats(&self) -> JammerStats {
        self.stats
    }

    /// A frame started on air.
    pub fn on_start<R: RngCore>(&mut self, tx: &Transmission, rng: &mut R) -> Option<Reaction> {
        let now = tx.start;
        if tx.source == self.cfg.node {
            return None;
        }
        match self.cfg.listen.hears(tx, now, rng) {
            Hearing::Deaf => return None,
            Hearing::Missed => {
                self.stats.missed += 1;
                return None;
            }
            Hearing::Heard if now < self.ready_at => {
                self.stats.busy += 1;
                return None;
            }
            Hearing::Heard => self.stats.heard += 1,
        }
        let tsym = phy::symbol_time(&tx.params);
        match &self.cfg.mode {
            JamMode::Triggered { detect_delay_symbols } => {
                self.stats.matched += 1;
                let at = now + Micros(tsym.0 * *detect_delay_symbols as u64);
                Some(self.commit(at, &tx.params))
            }
            JamMode::Selective { policy, decision_delay, .. } => {
                let read = policy.read_bytes().min(tx.wire.len());
                let at = now + phy::read_point(&tx.params, read).expect("frame length already valid") + *decision_delay;
                self.ready_at = at;
                Some(Reaction::DecideAt(at))
            }
        }
    }

    /// Decision point of a selective jammer for `tx`.
    pub fn decide(&mut self, tx: &Transmission, now: Micros) -> Option<Micros> {
        let JamMode::Selective { policy, turnaround_symbols, .. } = &self.cfg.mode else {
            return None;
        };
        if !policy.matches(&tx.wire.bytes) {
            return None;
        }
        self.stats.matched += 1;
        let at = now + Micros(phy::symbol_time(&tx.params).0 * *turnaround_symbols as u64);
        match self.commit(at, &tx.params) {
            Reaction::JamAt(t) => Some(t),
            Reaction::DecideAt(_) => unreachable!(),
        }
    }

    fn commit(&mut self, at: Micros, params: &RadioParams) -> Reaction {
        self.stats.jams += 1;
        self.ready_at = at + jam_airtime(params, self.cfg.jam_bytes) + self.cfg.rearm;
        Reaction::JamAt(at)
    }
}

/// Where and how often stored frames are sent again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub start: Micros,
    /// Spacing between replays; the victim's observed mean inter-arrival
    /// when absent.
    #[serde(default)]
    pub interval: Option<Micros>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredFrame {
    pub dev_addr: Option<DevAddr>,
    pub channel_hz: u32,
    pub params: RadioParams,
    pub wire: WireFrame,
    pub recorded_at: Micros,
}

/// Frames captured by the sniffer, replayed in capture order.
#[derive(Debug, Clone, Default)]
pub struct ReplayStore {
    queue: VecDeque<StoredFrame>,
    seen: BTreeMap<Option<DevAddr>, (Micros, Micros, u64)>,
}

impl ReplayStore {
    pub fn push(&mut self, f: StoredFrame) {
        let e = self.seen.entry(f.dev_addr).or_insert((f.recorded_at, f.recorded_at, 0));
        e.1 = f.recorded_at;
        e.2 += 1;
        self.queue.push_back(f);
    }

    pub fn pop(&mut self) -> Option<StoredFrame> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Mean spacing of recorded frames from `dev`, if at least two were seen.
    pub fn mean_interval(&self, dev: Option<DevAddr>) -> Option<Micros> {
        let &(first, last, n) = self.seen.get(&dev)?;
        (n >= 2).then(|| Micros((last - first).0 / (n - 1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WormholeConfig {
    pub sniffer: NodeId,
    pub jammer: NodeId,
    pub listen: Listen,
    pub policy: CompiledPolicy,
    pub decision_delay: Micros,
    pub latency: LatencyModel,
    pub jam_bytes: usize,
    pub tx_power_dbm: f64,
    pub replay: Option<ReplayConfig>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WormholeStats {
    pub heard: u64,
    pub missed: u64,
    pub matched: u64,
    pub jams: u64,
    pub jammer_busy: u64,
    pub recorded: u64,
    pub replays: u64,
    /// Frames the sniffer lost to its own jammer.
    pub sniffer_jammed_itself: u64,
}

/// Gaussian sample truncated at zero by rejection.
pub fn sample_latency<R: RngCore>(model: &LatencyModel, rng: &mut R) -> Micros {
    if model.std.0 == 0 {
        return model.mean;
    }
    let normal = Normal::new(model.mean.0 as f64, model.std.0 as f64).expect("finite positive std");
    for _ in 0..64 {
        let x = normal.sample(rng);
        if x >= 0.0 {
            return Micros(x.round() as u64);
        }
    }
    Micros::ZERO
}

#[derive(Debug, Clone)]
pub struct Wormhole {
    cfg: WormholeConfig,
    jammer_ready_at: Micros,
    targeted: BTreeSet<TxId>,
    store: ReplayStore,
    stats: WormholeStats,
}

impl Wormhole {
    pub fn new(cfg: WormholeConfig) -> Self {
        Self { cfg, jammer_ready_at: Micros::ZERO, targeted: BTreeSet::new(), store: ReplayStore::default(), stats: WormholeStats::default() }
    }

    pub fn config(&self) -> &WormholeConfig {
        &self.cfg
    }

    pub fn stats(&self) -> WormholeStats {
        self.stats
    }

    pub fn store(&self) -> &ReplayStore {
        &self.store
    }

    /// A frame started and the sniffer locked onto it; returns the decision time.
    pub fn on_start<R: RngCore>(&mut self, tx: &Transmission, rng: &mut R) -> Option<Micros> {
        if tx.source == self.cfg.jammer || tx.kind == TxKind::Replay {
            return None;
        }
        match self.cfg.listen.hears(tx, tx.start, rng) {
            Hearing::Deaf => None,
            Hearing::Missed => {
                self.stats.missed += 1;
                None
            }
            Hearing::Heard => {
                self.stats.heard += 1;
                let read = self.cfg.policy.read_bytes().min(tx.wire.len());
                Some(tx.start + phy::read_point(&tx.params, read).expect("frame length already valid") + self.cfg.decision_delay)
            }
        }
    }

    /// Sniffer-side decision; on a match returns when the far jammer fires.
    pub fn decide<R: RngCore>(&mut self, tx: &Transmission, now: Micros, rng: &mut R) -> Option<Micros> {
        if !self.cfg.policy.matches(&tx.wire.bytes) {
            return None;
        }
        self.stats.matched += 1;
        self.targeted.insert(tx.id);
        let at = now + sample_latency(&self.cfg.latency, rng);
        if at < self.jammer_ready_at {
            self.stats.jammer_busy += 1;
            return None;
        }
        self.stats.jams += 1;
        self.jammer_ready_at = at + jam_airtime(&tx.params, self.cfg.jam_bytes);
        Some(at)
    }

    /// The sniffer finished receiving `tx`. Targeted frames that arrived
    /// intact go into the replay store.
    pub fn on_sniffed(&mut self, tx: &Transmission, intact: bool, hit_by_own_jam: bool) {
        if hit_by_own_jam {
            self.stats.sniffer_jammed_itself += 1;
        }
        if !self.targeted.remove(&tx.id) || !intact || self.cfg.replay.is_none() {
            return;
        }
        self.stats.recorded += 1;
        self.store.push(StoredFrame {
            dev_addr: decode_prefix(&tx.wire.bytes).dev_addr,
            channel_hz: tx.channel_hz,
            params: tx.params,
            wire: tx.wire.clone(),
            recorded_at: tx.start,
        });
    }

    /// Replay tick at `now`: the frame to send (if any, and if the jammer
    /// radio is free) and when to tick again.
    pub fn replay_tick(&mut self, now: Micros) -> (Option<StoredFrame>, Option<Micros>) {
        let Some(cfg) = self.cfg.replay else { return (None, None) };
        if now < self.jammer_ready_at {
            return (None, Some(self.jammer_ready_at));
        }
        let Some(f) = self.store.pop() else {
            // Nothing recorded yet: poll again only when pacing is fixed.
            return (None, cfg.interval.map(|i| now + i));
        };
        let airtime = phy::time_on_air(&f.params, f.wire.len()).expect("recorded from air");
        self.jammer_ready_at = now + airtime;
        self.stats.replays += 1;
        let gap = cfg
            .interval
            .or_else(|| self.store.mean_interval(f.dev_addr))
            .unwrap_or(airtime)
            .max(airtime);
        (Some(f), Some(now + gap))
    }
}
