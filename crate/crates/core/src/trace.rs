//! Gateway traffic logs: a neutral CSV format, aggregate statistics, and a
//! generator that produces logs with given statistics.
//!
//! Columns: `timestamp_us,channel_hz,sf,wire_len,dev_addr,status`.
//! `dev_addr` is 8 hex digits or empty when the header was unreadable;
//! `status` is a free-form gateway verdict (`accept`, `reject_crc`, ...).
//! Exports from real gateways can be mapped onto [`TraceRecord`] and fed to
//! [`analyze`] unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{DevAddr, HEADER_OVERHEAD};
use crate::num::Real;
use crate::sim::Record;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("traffic log is empty")]
    EmptyLog,
    #[error("trace CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot generate from these statistics: {0}")]
    Profile(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub timestamp_us: u64,
    pub channel_hz: u32,
    pub sf: u8,
    pub wire_len: usize,
    pub dev_addr: Option<DevAddr>,
    pub status: String,
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_csv<W: Write>(out: W, records: &[TraceRecord]) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Network-server verdicts of a simulated run, in the trace format.
pub fn from_event_log(records: &[Record]) -> Vec<TraceRecord> {
    records
        .iter()
        .filter_map(|r| match r {
            Record::Server { t, verdict, dev_addr, channel, sf, len, .. } => Some(TraceRecord {
                timestamp_us: t.0,
                channel_hz: *channel,
                sf: *sf,
                wire_len: *len,
                dev_addr: *dev_addr,
                status: serde_json::to_value(verdict).ok()?.as_str()?.to_string(),
            }),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficStats<T> {
    pub message_count: u64,
    pub distinct_devices: u64,
    pub channel_histogram: BTreeMap<u32, T>,
    pub sf_histogram: BTreeMap<u8, T>,
    pub mean_wire_length: T,
    /// Mean wire length minus the 13 bytes of headers and MIC.
    pub mean_payload_length: T,
    /// Mean time between consecutive messages; zero for a single message.
    pub mean_interval_us: T,
}

fn histogram<K: Ord + Copy, T: Real>(keys: impl Iterator<Item = K>, n: usize) -> BTreeMap<K, T> {
    let mut counts = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_insert(0u64) += 1;
    }
    counts.into_iter().map(|(k, c)| (k, T::of(c as f64) / T::of(n as f64))).collect()
}

pub fn analyze<T: Real>(log: &[TraceRecord]) -> Result<TrafficStats<T>, TraceError> {
    let n = log.len();
    if n == 0 {
        return Err(TraceError::EmptyLog);
    }
    let devices: BTreeSet<DevAddr> = log.iter().filter_map(|r| r.dev_addr).collect();
    let total: u64 = log.iter().map(|r| r.wire_len as u64).sum();
    let mean_wire = T::of(total as f64) / T::of(n as f64);
    let (lo, hi) = log.iter().fold((u64::MAX, 0), |(lo, hi), r| (lo.min(r.timestamp_us), hi.max(r.timestamp_us)));
    let interval = if n > 1 { T::of((hi - lo) as f64) / T::of((n - 1) as f64) } else { T::zero() };
    Ok(TrafficStats {
        message_count: n as u64,
        distinct_devices: devices.len() as u64,
        channel_histogram: histogram(log.iter().map(|r| r.channel_hz), n),
        sf_histogram: histogram(log.iter().map(|r| r.sf), n),
        mean_wire_length: mean_wire,
        mean_payload_length: mean_wire - T::of(HEADER_OVERHEAD as f64),
        mean_interval_us: interval,
    })
}

/// Draws `n` accepted messages whose statistics converge to `stats`.
///
/// Wire lengths take the two integers around the mean with the weights that
/// reproduce it; devices are drawn uniformly from `distinct_devices`
/// addresses; arrivals are Poisson at the mean interval.
pub fn generate<T: Real, R: Rng + ?Sized>(stats: &TrafficStats<T>, n: usize, rng: &mut R) -> Result<Vec<TraceRecord>, TraceError> {
    let f = |v: &T| v.to_f64_lossy();
    let channels: Vec<(u32, f64)> = stats.channel_histogram.iter().map(|(k, v)| (*k, f(v))).collect();
    let sfs: Vec<(u8, f64)> = stats.sf_histogram.iter().map(|(k, v)| (*k, f(v))).collect();
    let ch_idx = WeightedIndex::new(channels.iter().map(|c| c.1)).map_err(|_| TraceError::Profile("channel histogram"))?;
    let sf_idx = WeightedIndex::new(sfs.iter().map(|c| c.1)).map_err(|_| TraceError::Profile("SF histogram"))?;
    let mean_len = f(&stats.mean_wire_length);
    if mean_len.is_nan() || mean_len < HEADER_OVERHEAD as f64 {
        return Err(TraceError::Profile("mean wire length below header size"));
    }
    let base = mean_len.floor();
    let p_up = mean_len - base;
    let devices = stats.distinct_devices.max(1);
    let gaps = match f(&stats.mean_interval_us) {
        m if m > 0.0 => Some(Exp::new(1.0 / m).map_err(|_| TraceError::Profile("interval"))?),
        _ => None,
    };
    let mut t = 0f64;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let up = rng.random::<f64>() < p_up;
        out.push(TraceRecord {
            timestamp_us: t.round() as u64,
            channel_hz: channels[ch_idx.sample(rng)].0,
            sf: sfs[sf_idx.sample(rng)].0,
            wire_len: base as usize + up as usize,
            dev_addr: Some(DevAddr(0x2600_0000 + rng.random_range(0..devices) as u32)),
            status: "accept".to_string(),
        });
        if let Some(g) = &gaps {
            t += g.sample(rng);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actors::device::EU868_OBSERVED;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(t: u64, ch: u32, len: usize, addr: u32) -> TraceRecord {
        TraceRecord { timestamp_us: t, channel_hz: ch, sf: 7, wire_len: len, dev_addr: Some(DevAddr(addr)), status: "accept".into() }
    }

    /// 1000 messages split over the eight EU868 channels in the observed
    /// city-scale proportions.
    fn city_log() -> Vec<TraceRecord> {
        let counts = [91, 107, 89, 103, 96, 171, 187, 156];
        let mut out = Vec::new();
        for ((ch, _), c) in EU868_OBSERVED.iter().zip(counts) {
            for _ in 0..c {
                let i = out.len() as u64;
                out.push(rec(i * 1000, *ch, 18 + (i % 5 < 3) as usize, (i % 86) as u32));
            }
        }
        out
    }

    #[test]
    fn channel_shares() {
        let s = analyze::<f64>(&city_log()).unwrap();
        assert_eq!(s.message_count, 1000);
        assert_eq!(s.distinct_devices, 86);
        for (ch, want) in [(868_100_000, 0.171), (868_300_000, 0.187), (868_500_000, 0.156)] {
            assert!((s.channel_histogram[&ch] - want).abs() < 1e-9, "{ch}");
        }
        let sum: f64 = s.channel_histogram.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn payload_is_wire_minus_headers() {
        let log: Vec<_> = [19, 19, 19, 18, 18].iter().map(|&l| rec(0, 868_100_000, l, 1)).collect();
        let s = analyze::<f64>(&log).unwrap();
        assert!((s.mean_wire_length - 18.6).abs() < 1e-9);
        assert!((s.mean_payload_length - 5.6).abs() < 1e-9);
    }

    #[test]
    fn single_and_empty() {
        let s = analyze::<f32>(&[rec(5, 868_300_000, 20, 1)]).unwrap();
        assert_eq!(s.channel_histogram.into_iter().collect::<Vec<_>>(), vec![(868_300_000, 1.0)]);
        assert_eq!(s.mean_interval_us, 0.0);
        assert!(matches!(analyze::<f64>(&[]), Err(TraceError::EmptyLog)));
    }

    #[test]
    fn generator_analyzer_duality() {
        let target = analyze::<f64>(&city_log()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let got = analyze::<f64>(&generate(&target, 10_000, &mut rng).unwrap()).unwrap();
        for (ch, w) in &target.channel_histogram {
            assert!((got.channel_histogram[ch] - w).abs() < 0.02, "{ch}");
        }
        assert!((got.mean_wire_length / target.mean_wire_length - 1.0).abs() < 0.02);
        assert!((got.mean_interval_us / target.mean_interval_us - 1.0).abs() < 0.05);
        assert_eq!(got.distinct_devices, 86);
    }

    #[test]
    fn csv_round_trip() {
        let mut log = city_log()[..3].to_vec();
        log[1].dev_addr = None;
        log[1].status = "reject_crc".into();
        let mut buf = Vec::new();
        write_csv(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp_us,channel_hz,sf,wire_len,dev_addr,status\n"));
        assert!(text.lines().nth(2).unwrap().ends_with(",,reject_crc"));
        assert_eq!(read_csv(&buf[..]).unwrap(), log);
        assert!(read_csv("timestamp_us,channel_hz\nx,1\n".as_bytes()).is_err());
    }
}
