//! Traffic-profiling jamming detectors over network-server delivery logs.
//!
//! Both detectors watch the gap since each device's last accepted uplink.
//!
//! * Known rate: the operator knows the period `P`. Expected slots are
//!   re-anchored on every accept at `last + n·P`, each with a `±P/2`
//!   window. `k` consecutive empty slots raise an alarm at
//!   `last + k·P + P/2`.
//! * Learned rate: the first `warmup` of a device's accepts fixes a
//!   baseline gap threshold `τ = mean + z·std`. A gap of length `g`
//!   counts `ceil(g/τ) − 1` anomalous intervals; runs of at least `k`
//!   raise an alarm, and the first normal gap closes it.
//!
//! Rejected frames never move the timing state; they are tallied on the
//! alarm that covers them unless `hide_rejects` is set.
//!
//! The streaming [`Detector`] takes one record at a time; [`detect_known`]
//! and [`detect_learned`] are batch wrappers around it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actors::Verdict;
use crate::codec::DevAddr;
use crate::num::{mean_std, Real};
use crate::phy::Micros;
use crate::sim::Record;

pub const MIN_WARMUP_GAPS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("delivery log is empty")]
    EmptyLog,
    #[error("device {dev_addr} has {gaps} inter-arrival samples in its warm-up window, need {need}")]
    InsufficientWarmup { dev_addr: DevAddr, gaps: usize, need: usize },
    #[error("record at {at} precedes the previous record at {prev}")]
    Unordered { at: Micros, prev: Micros },
    #[error("invalid detector configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub t: Micros,
    /// `None` for frames whose header could not be trusted (CRC failure).
    pub dev_addr: Option<DevAddr>,
    pub accepted: bool,
    pub channel_hz: u32,
    pub sf: u8,
}

/// Server verdicts from an event log, in log order.
pub fn delivery_log(records: &[Record]) -> Vec<DeliveryRecord> {
    records
        .iter()
        .filter_map(|r| match *r {
            Record::Server { t, verdict, dev_addr, channel, sf, .. } => Some(DeliveryRecord {
                t,
                dev_addr,
                accepted: verdict == Verdict::Accept,
                channel_hz: channel,
                sf,
            }),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    KnownRate { period: Micros },
    LearnedRate { warmup: Micros },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig<T> {
    #[serde(flatten)]
    pub mode: Mode,
    /// Consecutive misses (known) or anomalous intervals (learned) to alarm.
    pub k: u32,
    /// Sensitivity of the learned threshold, in standard deviations.
    pub z: T,
    #[serde(default)]
    pub hide_rejects: bool,
}

impl<T: Real> DetectorConfig<T> {
    pub fn known(period: Micros, k: u32) -> Self {
        Self { mode: Mode::KnownRate { period }, k, z: T::of(2.0), hide_rejects: false }
    }

    pub fn learned(warmup: Micros, k: u32, z: T) -> Self {
        Self { mode: Mode::LearnedRate { warmup }, k, z, hide_rejects: false }
    }

    fn validate(&self) -> Result<(), DetectError> {
        if self.k == 0 {
            return Err(DetectError::Config("k must be at least 1"));
        }
        match self.mode {
            Mode::KnownRate { period } if period.0 == 0 => Err(DetectError::Config("period must be positive")),
            Mode::LearnedRate { warmup } if warmup.0 == 0 => Err(DetectError::Config("warm-up must be positive")),
            Mode::LearnedRate { .. } if !(self.z.is_finite() && self.z >= T::zero()) => {
                Err(DetectError::Config("z must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alarm {
    pub dev_addr: DevAddr,
    pub start: Micros,
    /// `None` while the alarm is still open at the end of the log.
    pub end: Option<Micros>,
    /// Rejected frames seen while the alarm was open.
    pub rejects: u64,
}

#[derive(Debug, Clone)]
enum DevState<T> {
    Warmup { first: Micros, accepts: Vec<Micros> },
    Armed { tau: T, last: Micros, run: u64, open: Option<usize> },
}

/// Streaming detector. Feed records in time order, then call [`Detector::finish`].
#[derive(Debug, Clone)]
pub struct Detector<T: Real> {
    cfg: DetectorConfig<T>,
    devices: BTreeMap<DevAddr, DevState<T>>,
    alarms: Vec<Alarm>,
    prev: Option<Micros>,
}

impl<T: Real> Detector<T> {
    pub fn new(cfg: DetectorConfig<T>) -> Result<Self, DetectError> {
        cfg.validate()?;
        Ok(Self { cfg, devices: BTreeMap::new(), alarms: Vec::new(), prev: None })
    }

    pub fn alarms(&self) -> &[Alarm] {
        &self.alarms
    }

    fn t(m: Micros) -> T {
        T::of(m.0 as f64)
    }

    fn micros(v: T) -> Micros {
        Micros(v.to_f64_lossy().round().max(0.0) as u64)
    }

    /// Alarm threshold check for a gap from `last` that has lasted until `now`.
    /// Returns the alarm start if this gap pushes the run over `k`.
    fn gap(&self, tau: T, last: Micros, run: u64, now: Micros) -> (u64, Option<Micros>) {
        let k = self.cfg.k as u64;
        let m = match self.cfg.mode {
            Mode::KnownRate { period } => {
                // Slots whose window [last + nP − P/2, last + nP + P/2) has closed.
                let elapsed = now.0.saturating_sub(last.0);
                (elapsed + period.0 / 2) / period.0
            }
            Mode::LearnedRate { .. } => {
                let g = Self::t(now - last) / tau;
                (g.ceil().to_f64_lossy() as u64).saturating_sub(1)
            }
        };
        let start = (run < k && run + m >= k).then(|| match self.cfg.mode {
            Mode::KnownRate { period } => last + Micros(k * period.0 + period.0 / 2),
            Mode::LearnedRate { .. } => last + Self::micros(tau * T::of((k - run) as f64)),
        });
        (m, start)
    }

    pub fn push(&mut self, r: &DeliveryRecord) -> Result<(), DetectError> {
        if let Some(prev) = self.prev {
            if r.t < prev {
                return Err(DetectError::Unordered { at: r.t, prev });
            }
        }
        self.prev = Some(r.t);
        self.advance(r.t, false)?;
        if !r.accepted {
            if !self.cfg.hide_rejects {
                self.tally_reject(r.dev_addr);
            }
            return Ok(());
        }
        let Some(addr) = r.dev_addr else { return Ok(()) };
        let period_tau = match self.cfg.mode {
            Mode::KnownRate { period } => Some(Self::t(period)),
            Mode::LearnedRate { .. } => None,
        };
        let Some(state) = self.devices.get_mut(&addr) else {
            let fresh = match period_tau {
                Some(tau) => DevState::Armed { tau, last: r.t, run: 0, open: None },
                None => DevState::Warmup { first: r.t, accepts: Vec::new() },
            };
            self.devices.insert(addr, fresh);
            return Ok(());
        };
        match state {
            DevState::Warmup { accepts, .. } => accepts.push(r.t),
            DevState::Armed { tau, last, run, open } => {
                let known = matches!(self.cfg.mode, Mode::KnownRate { .. });
                let m = match self.cfg.mode {
                    Mode::KnownRate { .. } => 0,
                    Mode::LearnedRate { .. } => {
                        let g = (Self::t(r.t - *last) / *tau).ceil().to_f64_lossy() as u64;
                        g.saturating_sub(1)
                    }
                };
                if known || m == 0 {
                    if let Some(i) = open.take() {
                        self.alarms[i].end = Some(if known { r.t } else { *last });
                    }
                    *run = 0;
                } else {
                    *run += m;
                }
                *last = r.t;
            }
        }
        Ok(())
    }

    fn tally_reject(&mut self, addr: Option<DevAddr>) {
        for state in self.devices.iter().filter(|(a, _)| addr.is_none_or(|x| x == **a)).map(|(_, s)| s) {
            if let DevState::Armed { open: Some(i), .. } = state {
                self.alarms[*i].rejects += 1;
            }
        }
    }

    /// Moves the clock to `now`: finishes warm-ups and raises alarms whose
    /// deadline has passed.
    fn advance(&mut self, now: Micros, closing: bool) -> Result<(), DetectError> {
        let warmup = match self.cfg.mode {
            Mode::LearnedRate { warmup } => Some(warmup),
            Mode::KnownRate { .. } => None,
        };
        let addrs: Vec<DevAddr> = self.devices.keys().copied().collect();
        for addr in addrs {
            if let (Some(w), DevState::Warmup { first, accepts }) = (warmup, &self.devices[&addr]) {
                if now <= *first + w && !closing {
                    continue;
                }
                let mut pts = vec![*first];
                pts.extend(accepts.iter().copied().filter(|&t| t <= *first + w));
                let rest: Vec<Micros> = accepts.iter().copied().filter(|&t| t > *first + w).collect();
                let gaps: Vec<T> = pts.windows(2).map(|p| Self::t(p[1] - p[0])).collect();
                if gaps.len() < MIN_WARMUP_GAPS {
                    return Err(DetectError::InsufficientWarmup { dev_addr: addr, gaps: gaps.len(), need: MIN_WARMUP_GAPS });
                }
                let (mean, std) = mean_std(&gaps).expect("non-empty");
                let tau = mean + self.cfg.z * std;
                self.devices.insert(addr, DevState::Armed { tau, last: *pts.last().unwrap(), run: 0, open: None });
                for t in rest {
                    self.push_accept_replay(addr, t);
                }
            }
            let DevState::Armed { tau, last, run, open } = self.devices[&addr].clone() else { continue };
            if open.is_some() {
                continue;
            }
            let (_, start) = self.gap(tau, last, run, now);
            if let Some(start) = start.filter(|&s| s <= now) {
                self.alarms.push(Alarm { dev_addr: addr, start, end: None, rejects: 0 });
                let i = self.alarms.len() - 1;
                if let DevState::Armed { open, .. } = self.devices.get_mut(&addr).unwrap() {
                    *open = Some(i);
                }
            }
        }
        Ok(())
    }

    fn push_accept_replay(&mut self, addr: DevAddr, t: Micros) {
        let r = DeliveryRecord { t, dev_addr: Some(addr), accepted: true, channel_hz: 0, sf: 0 };
        let prev = self.prev;
        self.prev = None;
        self.push(&r).expect("armed replay cannot fail");
        self.prev = prev;
    }

    /// Closes the stream at `end`; gaps still running count up to it.
    pub fn finish(mut self, end: Micros) -> Result<Vec<Alarm>, DetectError> {
        self.advance(end, true)?;
        self.alarms.sort_by_key(|a| (a.start, a.dev_addr));
        Ok(self.alarms)
    }
}

fn batch<T: Real>(log: &[DeliveryRecord], cfg: DetectorConfig<T>) -> Result<Vec<Alarm>, DetectError> {
    let end = log.last().ok_or(DetectError::EmptyLog)?.t;
    let mut d = Detector::new(cfg)?;
    for r in log {
        d.push(r)?;
    }
    d.finish(end)
}

pub fn detect_known<T: Real>(log: &[DeliveryRecord], period: Micros, k: u32) -> Result<Vec<Alarm>, DetectError> {
    batch(log, DetectorConfig::<T>::known(period, k))
}

pub fn detect_learned<T: Real>(log: &[DeliveryRecord], warmup: Micros, k: u32, z: T) -> Result<Vec<Alarm>, DetectError> {
    batch(log, DetectorConfig::learned(warmup, k, z))
}

/// Either mode, as configured.
pub fn detect<T: Real>(log: &[DeliveryRecord], cfg: DetectorConfig<T>) -> Result<Vec<Alarm>, DetectError> {
    batch(log, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A: DevAddr = DevAddr(0xAA);
    const P: u64 = 60_000_000;

    fn rec(t: u64, accepted: bool) -> DeliveryRecord {
        DeliveryRecord { t: Micros(t), dev_addr: if accepted { Some(A) } else { None }, accepted, channel_hz: 868_100_000, sf: 9 }
    }

    /// Periodic device at offset 45 s; frames whose slot falls in
    /// `[jam_from, jam_to)` arrive as CRC rejects, and every `drop_every`-th
    /// frame in that window is lost when `drop_every > 1`.
    fn log(n: u64, jam: Option<(u64, u64)>, drop_every: u64) -> Vec<DeliveryRecord> {
        (0..n)
            .map(|i| {
                let t = 45_000_000 + i * P;
                let jammed = jam.is_some_and(|(a, b)| t >= a && t < b) && (drop_every <= 1 || i % drop_every == 0);
                rec(t, !jammed)
            })
            .collect()
    }

    #[test]
    fn known_rate_ten_minute_jam() {
        let l = log(40, Some((600_000_000, 1_200_000_000)), 1);
        let alarms = detect_known::<f64>(&l, Micros(P), 3).unwrap();
        assert_eq!(alarms.len(), 1);
        let a = alarms[0];
        assert_eq!(a.start, Micros(795_000_000));
        assert_eq!(a.end, Some(Micros(1_245_000_000)));
        assert!(a.rejects >= 7);
    }

    #[test]
    fn known_rate_quiet_and_open_alarm() {
        assert!(detect_known::<f64>(&log(40, None, 1), Micros(P), 1).unwrap().is_empty());
        let l = log(20, Some((600_000_000, u64::MAX)), 1);
        let alarms = detect_known::<f64>(&l, Micros(P), 3).unwrap();
        assert_eq!((alarms.len(), alarms[0].end), (1, None));
    }

    #[test]
    fn learned_rate_total_jam() {
        let l = log(60, Some((2_000_000_000, u64::MAX)), 1);
        let alarms = detect_learned::<f64>(&l, Micros(25 * P), 3, 2.0).unwrap();
        assert_eq!(alarms.len(), 1);
        assert!(alarms[0].start >= Micros(2_000_000_000));
        assert!(alarms[0].start <= Micros(2_000_000_000 + 4 * P));
    }

    #[test]
    fn learned_rate_half_jam_within_twenty_periods() {
        let onset = 2_000_000_000;
        let l = log(80, Some((onset, u64::MAX)), 2);
        let alarms = detect_learned::<f64>(&l, Micros(25 * P), 3, 2.0).unwrap();
        assert!(!alarms.is_empty());
        assert!(alarms[0].start.0 - onset <= 20 * P, "{:?}", alarms[0]);
        assert!(alarms[0].end.is_none());
    }

    #[test]
    fn learned_needs_twenty_gaps() {
        let err = detect_learned::<f64>(&log(30, None, 1), Micros(10 * P), 3, 2.0).unwrap_err();
        assert_eq!(err, DetectError::InsufficientWarmup { dev_addr: A, gaps: 10, need: 20 });
        assert_eq!(detect_known::<f64>(&[], Micros(P), 3).unwrap_err(), DetectError::EmptyLog);
        assert!(matches!(detect_known::<f64>(&log(3, None, 1), Micros(P), 0), Err(DetectError::Config(_))));
    }

    #[test]
    fn unordered_log_rejected() {
        let l = vec![rec(10, true), rec(5, true)];
        assert!(matches!(detect_known::<f64>(&l, Micros(P), 3), Err(DetectError::Unordered { .. })));
    }

    #[test]
    fn rejects_can_be_hidden() {
        let l = log(40, Some((600_000_000, 1_200_000_000)), 1);
        let mut cfg = DetectorConfig::<f64>::known(Micros(P), 3);
        cfg.hide_rejects = true;
        assert_eq!(detect(&l, cfg).unwrap()[0].rejects, 0);
    }

    #[test]
    fn works_in_f32() {
        let l = log(40, Some((600_000_000, 1_200_000_000)), 1);
        assert_eq!(detect_known::<f32>(&l, Micros(P), 3).unwrap().len(), 1);
    }

    proptest! {
        #[test]
        fn periodic_traffic_never_alarms(z in 1.0f64..5.0, k in 1u32..6, n in 25u64..80) {
            let l = log(n, None, 1);
            prop_assert!(detect_learned::<f64>(&l, Micros(22 * P), k, z).unwrap().is_empty());
            prop_assert!(detect_known::<f64>(&l, Micros(P), k).unwrap().is_empty());
        }

        #[test]
        fn delay_non_decreasing_in_k(k in 1u32..5) {
            let l = log(40, Some((600_000_000, u64::MAX)), 1);
            let a = detect_known::<f64>(&l, Micros(P), k).unwrap();
            let b = detect_known::<f64>(&l, Micros(P), k + 1).unwrap();
            prop_assert!(a[0].start <= b[0].start);
        }
    }
}
