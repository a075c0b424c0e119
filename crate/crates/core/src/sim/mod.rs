//! The simulation engine: a [`Medium`] plus the actors of a [`Scenario`].
//!
//! Every actor draws from its own ChaCha8 stream derived from the scenario
//! seed, so adding an adversary does not perturb device traffic. Timers that
//! fall after the scenario duration are dropped, except adversary decisions
//! about frames already on air; transmissions in flight at the horizon are
//! always resolved.

pub mod log;
pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::actors::jammer::jam_wire;
use crate::actors::{
    Attempt, DeviceError, EndDevice, JamMode, Jammer, JammerConfig, Listen, NetworkServer, Reaction, Verdict, Wormhole,
    WormholeConfig,
};
use crate::codec::DevAddr;
use crate::medium::{Medium, MediumError, NodeId, ReceptionOutcome, RxStatus, Step, Transmission, TxId, TxKind};
use crate::num::Real;
use crate::phy::{LatencyModel, Micros};
use crate::scenario::{AdversaryKind, NodeMap, Scenario, ScenarioError};
pub use log::{read_records, EventLog, Record};
pub use metrics::{DeviceMetrics, RunMetrics};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

const DEVICE_STREAM: u64 = 0;
const JAMMER_STREAM: u64 = 1 << 32;
const WORMHOLE_STREAM: u64 = 2 << 32;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug)]
enum Timer {
    Device(usize),
    Decide(usize, Box<Transmission>),
    WormholeDecide(usize, Box<Transmission>),
    Replay(usize),
}

#[derive(Debug, Clone, Copy)]
enum Origin {
    Device(usize),
    Jam,
    Replay,
}

struct DeviceSlot {
    name: String,
    node: NodeId,
    power: f64,
    dev: EndDevice,
    rng: ChaCha8Rng,
}

struct JammerSlot {
    name: String,
    jammer: Jammer,
    rng: ChaCha8Rng,
}

struct WormholeSlot {
    name: String,
    wh: Wormhole,
    rng: ChaCha8Rng,
}

/// Result of a finished run.
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub log: EventLog,
    pub nodes: NodeMap,
}

impl RunOutput {
    /// Parsed event records; empty when the scenario turned the log off.
    pub fn records(&self) -> Vec<Record> {
        read_records(self.log.text().as_bytes()).expect("own output parses")
    }
}

pub struct Simulation<T: Real> {
    seed: u64,
    duration: Micros,
    nodes: NodeMap,
    medium: Medium<T, Timer>,
    devices: Vec<DeviceSlot>,
    jammers: Vec<JammerSlot>,
    wormholes: Vec<WormholeSlot>,
    server: NetworkServer,
    gateways: BTreeSet<NodeId>,
    by_addr: BTreeMap<DevAddr, usize>,
    origin: BTreeMap<TxId, Origin>,
    log: EventLog,
    metrics: BTreeMap<usize, DeviceMetrics>,
}

impl<T: Real> Simulation<T> {
    pub fn new(s: &Scenario) -> Result<Self, SimError> {
        s.validate()?;
        let nodes = s.node_map()?;
        let id = |name: &str| nodes.id(name).expect("validated node name");
        let mut medium = Medium::new(s.link_model()?, s.capture_matrix()?);
        let mut server = NetworkServer::new();
        let mut gateways = BTreeSet::new();
        for g in &s.gateways {
            let node = id(&g.name);
            medium.add_receiver(node, g.listen_channels(), vec![TxKind::Jam]);
            gateways.insert(node);
        }
        let mut devices = Vec::new();
        let mut by_addr = BTreeMap::new();
        for (i, d) in s.devices.iter().enumerate() {
            server.register(d.dev_addr, d.keys());
            by_addr.insert(d.dev_addr, i);
            devices.push(DeviceSlot {
                name: d.name.clone(),
                node: id(&d.name),
                power: d.tx_power_dbm,
                dev: EndDevice::new(d.build()?)?,
                rng: stream(s.seed, DEVICE_STREAM + i as u64),
            });
        }
        let mut jammers = Vec::new();
        let mut wormholes = Vec::new();
        for (i, a) in s.adversaries.iter().enumerate() {
            let listen = Listen {
                channels: a.channels.clone(),
                sfs: a.sfs.clone(),
                detection_miss: a.detection_miss,
                active_from: a.active_from,
                active_until: a.active_until,
            };
            let compiled = || {
                a.policy.clone().expect("validated").compile(a.read_bytes).map_err(|e| ScenarioError::Invalid(e.to_string()))
            };
            match a.kind {
                AdversaryKind::Triggered | AdversaryKind::Selective => {
                    let mode = if a.kind == AdversaryKind::Triggered {
                        JamMode::Triggered { detect_delay_symbols: a.detect_delay_symbols }
                    } else {
                        JamMode::Selective { policy: compiled()?, decision_delay: a.decision_delay, turnaround_symbols: a.turnaround() }
                    };
                    jammers.push(JammerSlot {
                        name: a.name.clone(),
                        jammer: Jammer::new(JammerConfig {
                            node: id(&a.name),
                            listen,
                            mode,
                            jam_bytes: a.jam_bytes,
                            tx_power_dbm: a.tx_power_dbm,
                            rearm: a.rearm,
                        }),
                        rng: stream(s.seed, JAMMER_STREAM + i as u64),
                    });
                }
                AdversaryKind::Wormhole => {
                    let names = a.node_names();
                    let sniffer = id(&names[0]);
                    medium.add_receiver(sniffer, a.channels.clone(), vec![TxKind::Jam, TxKind::Replay]);
                    wormholes.push(WormholeSlot {
                        name: a.name.clone(),
                        wh: Wormhole::new(WormholeConfig {
                            sniffer,
                            jammer: id(&names[1]),
                            listen,
                            policy: compiled()?,
                            decision_delay: a.decision_delay,
                            latency: a.latency.unwrap_or_else(LatencyModel::wormhole_ethernet),
                            jam_bytes: a.jam_bytes,
                            tx_power_dbm: a.tx_power_dbm,
                            replay: a.replay,
                        }),
                        rng: stream(s.seed, WORMHOLE_STREAM + i as u64),
                    });
                }
            }
        }
        let mut sim = Self {
            seed: s.seed,
            duration: s.duration,
            nodes,
            medium,
            devices,
            jammers,
            wormholes,
            server,
            gateways,
            by_addr,
            origin: BTreeMap::new(),
            log: EventLog::new(s.outputs.event_log),
            metrics: BTreeMap::new(),
        };
        for i in 0..sim.devices.len() {
            sim.metrics.insert(i, DeviceMetrics::default());
            let slot = &mut sim.devices[i];
            if let Some(t) = slot.dev.first_attempt(&mut slot.rng) {
                sim.timer(t, Timer::Device(i))?;
            }
        }
        for i in 0..sim.wormholes.len() {
            if let Some(r) = sim.wormholes[i].wh.config().replay {
                sim.timer(r.start, Timer::Replay(i))?;
            }
        }
        Ok(sim)
    }

    pub fn now(&self) -> Micros {
        self.medium.now()
    }

    fn timer(&mut self, at: Micros, t: Timer) -> Result<(), SimError> {
        let keep = match t {
            Timer::Device(_) | Timer::Replay(_) => at <= self.duration,
            Timer::Decide(..) | Timer::WormholeDecide(..) => true,
        };
        if keep {
            self.medium.schedule_timer(at, t)?;
        }
        Ok(())
    }

    /// Processes every event up to and including `t_end`.
    pub fn run_until(&mut self, t_end: Micros) -> Result<(), SimError> {
        while self.medium.peek_time().is_some_and(|t| t <= t_end) {
            self.step()?;
        }
        Ok(())
    }

    /// Runs to the scenario horizon and settles frames still on air.
    pub fn run(mut self) -> Result<RunOutput, SimError> {
        self.run_until(self.duration)?;
        while self.medium.peek_time().is_some() {
            self.step()?;
        }
        Ok(self.into_output())
    }

    fn into_output(self) -> RunOutput {
        let mut m = RunMetrics {
            seed: self.seed,
            events: self.log.len(),
            digest: self.log.digest(),
            server: self.server.tally(),
            ..Default::default()
        };
        for (i, d) in self.devices.iter().enumerate() {
            m.devices.insert(d.name.clone(), self.metrics[&i]);
        }
        for j in &self.jammers {
            m.jammers.insert(j.name.clone(), j.jammer.stats());
        }
        for w in &self.wormholes {
            m.wormholes.insert(w.name.clone(), w.wh.stats());
        }
        RunOutput { metrics: m, log: self.log, nodes: self.nodes }
    }

    fn step(&mut self) -> Result<(), SimError> {
        let Some(step) = self.medium.step()? else { return Ok(()) };
        match step {
            Step::Started { tx, not_heard } => self.on_started(tx, not_heard),
            Step::Ended { tx, outcomes } => {
                self.on_ended(&tx, &outcomes);
                Ok(())
            }
            Step::Timer(t) => self.on_timer(t),
        }
    }

    fn send(&mut self, tx: Transmission, origin: Origin) -> Result<(), SimError> {
        self.origin.insert(tx.id, origin);
        self.medium.schedule(tx)?;
        Ok(())
    }

    fn jam(&mut self, source: NodeId, power: f64, bytes: usize, victim: &Transmission, at: Micros, rng_of: RngOf) -> Result<(), SimError> {
        let rng = match rng_of {
            RngOf::Jammer(i) => &mut self.jammers[i].rng,
            RngOf::Wormhole(i) => &mut self.wormholes[i].rng,
        };
        let wire = jam_wire(&victim.params, bytes, rng);
        let id = self.medium.next_tx_id();
        let tx = Transmission::new(id, source, victim.channel_hz, victim.params, wire, at, power, TxKind::Jam)
            .map_err(MediumError::from)?;
        self.send(tx, Origin::Jam)
    }

    fn on_timer(&mut self, t: Timer) -> Result<(), SimError> {
        let now = self.now();
        match t {
            Timer::Device(i) => {
                let slot = &mut self.devices[i];
                match slot.dev.attempt(now, &mut slot.rng)? {
                    Attempt::Send(u) => {
                        let next = slot.dev.next_attempt(now, &mut slot.rng);
                        let (node, power) = (slot.node, slot.power);
                        self.metrics.get_mut(&i).unwrap().sent += 1;
                        let id = self.medium.next_tx_id();
                        let tx = Transmission::new(id, node, u.channel_hz, u.params, u.wire, now, power, TxKind::Data)
                            .map_err(MediumError::from)?;
                        self.send(tx, Origin::Device(i))?;
                        if let Some(t) = next {
                            self.timer(t, Timer::Device(i))?;
                        }
                    }
                    Attempt::Deferred(until) => {
                        self.metrics.get_mut(&i).unwrap().deferrals += 1;
                        self.log.push(&Record::Deferral { t: now, node: slot.node.0, until });
                        self.timer(until, Timer::Device(i))?;
                    }
                    Attempt::Exhausted => {}
                }
            }
            Timer::Decide(i, tx) => {
                let at = self.jammers[i].jammer.decide(&tx, now);
                let cfg = self.jammers[i].jammer.config();
                let (node, power, bytes) = (cfg.node, cfg.tx_power_dbm, cfg.jam_bytes);
                self.log.push(&Record::Decision { t: now, node: node.0, tx: tx.id.0, matched: at.is_some() });
                if let Some(at) = at {
                    self.jam(node, power, bytes, &tx, at, RngOf::Jammer(i))?;
                }
            }
            Timer::WormholeDecide(i, tx) => {
                let w = &mut self.wormholes[i];
                let matched = w.wh.config().policy.matches(&tx.wire.bytes);
                let at = w.wh.decide(&tx, now, &mut w.rng);
                let cfg = w.wh.config();
                let (sniffer, node, power, bytes) = (cfg.sniffer, cfg.jammer, cfg.tx_power_dbm, cfg.jam_bytes);
                self.log.push(&Record::Decision { t: now, node: sniffer.0, tx: tx.id.0, matched });
                if let Some(at) = at {
                    self.jam(node, power, bytes, &tx, at, RngOf::Wormhole(i))?;
                }
            }
            Timer::Replay(i) => {
                let (frame, next) = self.wormholes[i].wh.replay_tick(now);
                if let Some(f) = frame {
                    let cfg = self.wormholes[i].wh.config();
                    let (node, power) = (cfg.jammer, cfg.tx_power_dbm);
                    let id = self.medium.next_tx_id();
                    let tx = Transmission::new(id, node, f.channel_hz, f.params, f.wire, now, power, TxKind::Replay)
                        .map_err(MediumError::from)?;
                    self.send(tx, Origin::Replay)?;
                }
                if let Some(t) = next {
                    self.timer(t, Timer::Replay(i))?;
                }
            }
        }
        Ok(())
    }

    fn log_rx(&mut self, t: Micros, o: &ReceptionOutcome) {
        self.log.push(&Record::Rx {
            t,
            tx: o.tx.0,
            receiver: o.receiver.0,
            status: o.status,
            corrupted_from_byte: o.corrupted_from_byte,
            jammed: o.jammed,
        });
    }

    fn on_started(&mut self, tx: Transmission, not_heard: Vec<ReceptionOutcome>) -> Result<(), SimError> {
        self.log.push(&Record::TxStart {
            t: tx.start,
            tx: tx.id.0,
            node: tx.source.0,
            kind: tx.kind,
            channel: tx.channel_hz,
            sf: tx.params.spreading_factor(),
            len: tx.wire.len(),
            end: tx.end,
        });
        for o in &not_heard {
            self.log_rx(tx.start, o);
        }
        if tx.kind == TxKind::Jam {
            return Ok(());
        }
        for i in 0..self.jammers.len() {
            let slot = &mut self.jammers[i];
            match slot.jammer.on_start(&tx, &mut slot.rng) {
                None => {}
                Some(Reaction::DecideAt(at)) => self.timer(at, Timer::Decide(i, Box::new(tx.clone())))?,
                Some(Reaction::JamAt(at)) => {
                    let cfg = slot.jammer.config();
                    let (node, power, bytes) = (cfg.node, cfg.tx_power_dbm, cfg.jam_bytes);
                    self.jam(node, power, bytes, &tx, at, RngOf::Jammer(i))?;
                }
            }
        }
        for i in 0..self.wormholes.len() {
            let w = &mut self.wormholes[i];
            let sniffer = w.wh.config().sniffer;
            let locked = tx.kind == TxKind::Data
                && tx.source != sniffer
                && w.wh.config().listen.channels.contains(&tx.channel_hz)
                && !not_heard.iter().any(|o| o.receiver == sniffer);
            if !locked {
                continue;
            }
            if let Some(at) = w.wh.on_start(&tx, &mut w.rng) {
                self.timer(at, Timer::WormholeDecide(i, Box::new(tx.clone())))?;
            }
        }
        Ok(())
    }

    fn on_ended(&mut self, tx: &Transmission, outcomes: &[ReceptionOutcome]) {
        let origin = self.origin.remove(&tx.id);
        for o in outcomes {
            self.log_rx(tx.end, o);
        }
        for w in &mut self.wormholes {
            let sniffer = w.wh.config().sniffer;
            if let Some(o) = outcomes.iter().find(|o| o.receiver == sniffer) {
                w.wh.on_sniffed(tx, o.status == RxStatus::Delivered, o.jammed);
            }
        }
        if tx.kind == TxKind::Jam {
            return;
        }
        let at_gw: Vec<&ReceptionOutcome> = outcomes.iter().filter(|o| self.gateways.contains(&o.receiver)).collect();
        let best = if at_gw.iter().any(|o| o.status == RxStatus::Delivered) {
            RxStatus::Delivered
        } else if at_gw.is_empty() {
            RxStatus::NotHeard
        } else {
            RxStatus::CrcFailed
        };
        let jammed = best == RxStatus::CrcFailed && at_gw.iter().any(|o| o.jammed);
        if let Some(Origin::Device(i)) = origin {
            let m = self.metrics.get_mut(&i).unwrap();
            match best {
                RxStatus::Delivered => m.delivered += 1,
                RxStatus::CrcFailed => m.crc_failed += 1,
                RxStatus::NotHeard => m.not_heard += 1,
            }
            m.jammed += jammed as u64;
        }
        if best == RxStatus::NotHeard {
            return;
        }
        let r = self.server.receive(best, &tx.wire.bytes);
        self.log.push(&Record::Server {
            t: tx.end,
            tx: tx.id.0,
            kind: tx.kind,
            verdict: r.verdict,
            dev_addr: r.dev_addr,
            fcnt: r.fcnt,
            channel: tx.channel_hz,
            sf: tx.params.spreading_factor(),
            len: tx.wire.len(),
        });
        match origin {
            Some(Origin::Device(i)) => {
                let m = self.metrics.get_mut(&i).unwrap();
                match r.verdict {
                    Verdict::Accept => m.accepted += 1,
                    Verdict::RejectMic => m.reject_mic += 1,
                    Verdict::RejectReplay => m.reject_replay += 1,
                    Verdict::RejectCrc => {}
                }
            }
            Some(Origin::Replay) => {
                let victim = crate::codec::decode_prefix(&tx.wire.bytes).dev_addr.and_then(|a| self.by_addr.get(&a));
                if let Some(&i) = victim {
                    let m = self.metrics.get_mut(&i).unwrap();
                    if r.verdict == Verdict::Accept {
                        m.replay_accepted += 1;
                    } else {
                        m.replay_rejected += 1;
                    }
                }
            }
            _ => {}
        }
    }
}

#[derive(Clone, Copy)]
enum RngOf {
    Jammer(usize),
    Wormhole(usize),
}

/// Builds and runs `scenario` with `f64` arithmetic.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    Simulation::<f64>::new(scenario)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actors::JamPolicy;
    use crate::scenario::{AdversarySpec, DeviceSpec, GatewaySpec};

    const CH: u32 = 868_100_000;

    fn base(frames: u32) -> Scenario {
        let mut s = Scenario::new(11, Micros::from_secs(24 * 3600));
        s.links.default_dbm = Some(-90.0);
        s.gateways.push(GatewaySpec { name: "gw".into(), channels: vec![CH] });
        let mut d = DeviceSpec::periodic("dev", 0x0100_0001, 9, CH, Micros::from_secs(60), Micros::from_secs(1));
        d.max_frames = Some(frames);
        s.devices.push(d);
        s
    }

    #[test]
    fn empty_scenario_has_empty_log() {
        let out = run(&Scenario::new(1, Micros::from_secs(10))).unwrap();
        assert!(out.log.is_empty());
        assert!(out.metrics.devices.is_empty());
        assert_eq!(out.metrics.digest, EventLog::new(false).digest());
    }

    #[test]
    fn lone_device_is_always_accepted() {
        let out = run(&base(100)).unwrap();
        let m = out.metrics.device("dev");
        assert_eq!((m.sent, m.delivered, m.accepted), (100, 100, 100));
        assert!(m.is_consistent());
        let servers = out.records().iter().filter(|r| matches!(r, Record::Server { .. })).count();
        assert_eq!(servers, 100);
    }

    #[test]
    fn same_seed_same_digest() {
        let mut s = base(50);
        s.devices[0].channels.clear();
        s.gateways[0].channels.clear();
        let mut a = AdversarySpec::new("j", AdversaryKind::Selective, vec![CH]);
        a.policy = Some(JamPolicy::Any);
        a.detection_miss = 0.3;
        s.adversaries.push(a);
        let x = run(&s).unwrap().metrics;
        let y = run(&s).unwrap().metrics;
        assert_eq!(x.digest, y.digest);
        s.seed += 1;
        assert_ne!(run(&s).unwrap().metrics.digest, x.digest);
    }

    #[test]
    fn selective_jam_corrupts_after_header() {
        let mut s = base(20);
        s.links.entries.push(crate::scenario::LinkEntry { from: "j".into(), to: "gw".into(), rssi_dbm: -40.0 });
        let mut a = AdversarySpec::new("j", AdversaryKind::Selective, vec![CH]);
        a.policy = Some(JamPolicy::DevAddr(vec![DevAddr(0x0100_0001)]));
        s.adversaries.push(a);
        let out = run(&s).unwrap();
        let m = out.metrics.device("dev");
        assert_eq!((m.sent, m.jammed, m.accepted), (20, 20, 0));
        for r in out.records() {
            if let Record::Rx { status: RxStatus::CrcFailed, corrupted_from_byte, receiver: 0, .. } = r {
                assert!(corrupted_from_byte.unwrap() >= 12);
            }
        }
    }

    #[test]
    fn horizon_drops_future_timers_but_settles_air() {
        let mut s = base(1000);
        s.duration = Micros::from_secs(30 * 60);
        let out = run(&s).unwrap();
        let m = out.metrics.device("dev");
        assert_eq!(m.sent, 30);
        assert_eq!(m.delivered, 30);
    }
}
