//! Reference experiments: timing tables, the jammability matrix, the RSSI
//! sweep, and builders for the canonical attack scenarios.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::actors::JamPolicy;
use crate::codec::DevAddr;
use crate::phy::{jamming_window, predict_jammable, read_point, time_on_air, Jammability, LatencyModel, Micros, PhyError, RadioParams};
use crate::scenario::{AdversaryKind, AdversarySpec, CaptureOverride, DeviceSpec, GatewaySpec, LinkEntry, Scenario};
use crate::sim::{self, SimError};

pub const SPREADING_FACTORS: [u8; 6] = [7, 8, 9, 10, 11, 12];
/// Frame sizes of the jammability matrix.
pub const MATRIX_SIZES: [usize; 5] = [17, 27, 37, 47, 57];
pub const AIRTIME_SIZES: [usize; 6] = [5, 17, 27, 37, 47, 57];
pub const CHANNEL: u32 = 868_100_000;
pub const GATEWAY: &str = "gw";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimingRow {
    pub sf: u8,
    pub size: usize,
    pub airtime_us: u64,
    pub read_point_us: u64,
    /// Airtime left after the read point; negative when the prefix is the frame.
    pub window_us: i64,
}

/// Airtime, read point and jamming window for every `(sf, size)` pair.
/// `base` supplies everything but the spreading factor.
pub fn timing_table(base: &RadioParams, sfs: &[u8], sizes: &[usize], read_bytes: usize) -> Result<Vec<TimingRow>, PhyError> {
    let mut rows = Vec::new();
    for &sf in sfs {
        let p = with_sf(base, sf)?;
        for &size in sizes {
            rows.push(TimingRow {
                sf,
                size,
                airtime_us: time_on_air(&p, size)?.0,
                read_point_us: read_point(&p, read_bytes)?.0,
                window_us: jamming_window(&p, size, read_bytes)?,
            });
        }
    }
    Ok(rows)
}

fn with_sf(base: &RadioParams, sf: u8) -> Result<RadioParams, PhyError> {
    RadioParams::new(sf, base.bandwidth().hz())?
        .with_coding_rate(base.coding_rate())?
        .with_preamble(base.preamble_symbols())
        .map(|p| p.with_explicit_header(base.explicit_header()).with_crc(base.crc_on()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub predicted: Jammability,
    /// `(jammed, sent)` when the cell was simulated.
    pub observed: Option<(u64, u64)>,
}

impl Cell {
    pub fn observed_class(&self) -> Option<Jammability> {
        self.observed.map(|(j, n)| Jammability::from_rate(j as usize, n as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    pub read_bytes: usize,
    pub latency: LatencyModel,
    pub sfs: Vec<u8>,
    pub sizes: Vec<usize>,
    pub cells: BTreeMap<(u8, usize), Cell>,
}

impl Matrix {
    pub fn predict(sfs: &[u8], sizes: &[usize], read_bytes: usize, latency: LatencyModel) -> Result<Self, PhyError> {
        let mut cells = BTreeMap::new();
        for &sf in sfs {
            let p = RadioParams::sf(sf);
            for &size in sizes {
                let predicted = predict_jammable(&p, size, read_bytes, &latency)?;
                cells.insert((sf, size), Cell { predicted, observed: None });
            }
        }
        Ok(Self { read_bytes, latency, sfs: sfs.to_vec(), sizes: sizes.to_vec(), cells })
    }

    /// Fills every cell with the outcome of `frames` simulated frames
    /// attacked by a wormhole with this matrix's latency.
    pub fn simulate(&mut self, frames: u32, seed: u64) -> Result<(), SimError> {
        for (&(sf, size), cell) in self.cells.iter_mut() {
            let s = wormhole_cell_scenario(sf, size, self.read_bytes, self.latency, frames, seed);
            let m = sim::run(&s)?.metrics;
            let d = m.device("victim");
            cell.observed = Some((d.jammed, d.sent));
        }
        Ok(())
    }

    pub fn get(&self, sf: u8, size: usize) -> &Cell {
        &self.cells[&(sf, size)]
    }

    pub fn count(&self, class: Jammability, observed: bool) -> usize {
        self.cells
            .values()
            .filter(|c| if observed { c.observed_class() == Some(class) } else { c.predicted == class })
            .count()
    }

    /// Sizes as rows, spreading factors as columns; simulated cells show
    /// `predicted/observed`.
    pub fn grid(&self) -> String {
        let mut s = String::from("size");
        for sf in &self.sfs {
            let _ = write!(s, "\tSF{sf}");
        }
        s.push('\n');
        for &size in &self.sizes {
            let _ = write!(s, "{size}");
            for &sf in &self.sfs {
                let c = self.get(sf, size);
                match c.observed_class() {
                    Some(o) => {
                        let _ = write!(s, "\t{}/{}", c.predicted, o);
                    }
                    None => {
                        let _ = write!(s, "\t{}", c.predicted);
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("sf,size,window_us,predicted,jammed,sent,observed\n");
        for (&(sf, size), c) in &self.cells {
            let window = jamming_window(&RadioParams::sf(sf), size, self.read_bytes).unwrap_or_default();
            let (j, n, o) = match (c.observed, c.observed_class()) {
                (Some((j, n)), Some(o)) => (j.to_string(), n.to_string(), o.letter().to_string()),
                _ => Default::default(),
            };
            let _ = writeln!(s, "{sf},{size},{window},{},{j},{n},{o}", c.predicted);
        }
        s
    }

    /// Cells where the model and known field behaviour disagree.
    pub fn notes(&self) -> Vec<String> {
        let sf8_s: Vec<usize> =
            self.sizes.iter().copied().filter(|&z| self.cells.get(&(8, z)).is_some_and(|c| c.predicted == Jammability::Success)).collect();
        let mut out = Vec::new();
        if !sf8_s.is_empty() {
            out.push(format!(
                "SF8: the timing model predicts S for sizes {sf8_s:?}, but field measurements with the reference \
                 hardware jammed no SF8 frames at all; the prediction is reported as computed"
            ));
        }
        out
    }
}

/// One device, one gateway and a wormhole whose jammer sits next to the
/// gateway; replay off.
pub fn wormhole_cell_scenario(sf: u8, size: usize, read_bytes: usize, latency: LatencyModel, frames: u32, seed: u64) -> Scenario {
    let mut s = Scenario::new(seed, Micros::from_secs(300 * (frames as u64 + 1)));
    s.links.default_dbm = Some(-90.0);
    s.gateways.push(GatewaySpec { name: GATEWAY.into(), channels: vec![CHANNEL] });
    let mut d = DeviceSpec::periodic("victim", 0x2601_0001, sf, CHANNEL, Micros::from_secs(300), Micros::from_secs(1));
    d.frame_size = size;
    d.max_frames = Some(frames);
    s.devices.push(d);
    let mut a = AdversarySpec::new("wh", AdversaryKind::Wormhole, vec![CHANNEL]);
    a.policy = Some(JamPolicy::DevAddr(vec![DevAddr(0x2601_0001)]));
    a.read_bytes = read_bytes;
    a.latency = Some(latency);
    s.adversaries.push(a);
    s.links.entries.push(link("wh.jammer", GATEWAY, -40.0));
    s.links.entries.push(link("wh.jammer", "wh.sniffer", -140.0));
    s
}

fn link(from: &str, to: &str, rssi_dbm: f64) -> LinkEntry {
    LinkEntry { from: from.into(), to: to.into(), rssi_dbm }
}

/// Target and control device on one channel, half a period apart, and a
/// selective jammer that only wants the target.
pub fn selective_scenario(sf: u8, frames: u32, detection_miss: f64, seed: u64) -> Scenario {
    let period = Micros::from_secs(300);
    let mut s = Scenario::new(seed, Micros(period.0 * (frames as u64 + 1)));
    s.links.default_dbm = Some(-100.0);
    s.gateways.push(GatewaySpec { name: GATEWAY.into(), channels: vec![CHANNEL] });
    for (i, name) in ["target", "control"].into_iter().enumerate() {
        let offset = Micros(1_000_000 + i as u64 * period.0 / 2);
        let mut d = DeviceSpec::periodic(name, 0x2602_0001 + i as u32, sf, CHANNEL, period, offset);
        d.max_frames = Some(frames);
        s.devices.push(d);
    }
    let mut a = AdversarySpec::new("jammer", AdversaryKind::Selective, vec![CHANNEL]);
    a.policy = Some(JamPolicy::DevAddr(vec![DevAddr(0x2602_0001)]));
    a.detection_miss = detection_miss;
    s.adversaries.push(a);
    s.links.entries.push(link("jammer", GATEWAY, -50.0));
    s
}

/// One device per spreading factor, each on its own channel, and a
/// triggered jammer listening on all of them.
pub fn triggered_scenario(frames_per_sf: u32, seed: u64) -> Scenario {
    let period = Micros::from_secs(300);
    let mut s = Scenario::new(seed, Micros(period.0 * (frames_per_sf as u64 + 1)));
    s.links.default_dbm = Some(-100.0);
    let channels: Vec<u32> = crate::actors::device::EU868_OBSERVED.iter().map(|c| c.0).take(6).collect();
    s.gateways.push(GatewaySpec { name: GATEWAY.into(), channels: channels.clone() });
    for (i, sf) in SPREADING_FACTORS.into_iter().enumerate() {
        let offset = Micros::from_secs(1 + 40 * i as u64);
        let mut d = DeviceSpec::periodic(&format!("sf{sf}"), 0x2603_0000 + sf as u32, sf, channels[i], period, offset);
        d.max_frames = Some(frames_per_sf);
        s.devices.push(d);
    }
    s.adversaries.push(AdversarySpec::new("jammer", AdversaryKind::Triggered, channels));
    s.links.entries.push(link("jammer", GATEWAY, -50.0));
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Jammer RSSI minus victim RSSI at the gateway, in dB.
    pub differential_db: f64,
    pub sent: u64,
    pub jammed: u64,
    pub jam_pct: f64,
}

/// A selective jammer against an SF12 device, with the SF12 co-channel
/// threshold set to `threshold_db`.
pub fn rssi_sweep_scenario(threshold_db: f64, frames: u32, seed: u64) -> Scenario {
    let mut s = selective_scenario(12, frames, 0.0, seed);
    s.devices.retain(|d| d.name == "target");
    s.capture.overrides.push(CaptureOverride { ds: 12, is: 12, db: threshold_db });
    s
}

/// Reruns `base` once per differential, moving the jammer's RSSI at the
/// gateway relative to the victim's.
pub fn rssi_sweep(base: &Scenario, victim: &str, jammer: &str, diffs: &[f64]) -> Result<Vec<SweepPoint>, SimError> {
    let gw = base.gateways.first().map(|g| g.name.clone()).unwrap_or_default();
    let victim_rssi = base
        .links
        .entries
        .iter()
        .find(|e| e.from == victim && e.to == gw)
        .map(|e| e.rssi_dbm)
        .or(base.links.default_dbm)
        .ok_or_else(|| SimError::Scenario(crate::scenario::ScenarioError::Invalid(format!("no RSSI for {victim} -> {gw}"))))?;
    let mut out = Vec::with_capacity(diffs.len());
    for &diff in diffs {
        let mut s = base.clone();
        s.links.entries.retain(|e| !(e.from == jammer && e.to == gw));
        s.links.entries.push(link(jammer, &gw, victim_rssi + diff));
        let m = sim::run(&s)?.metrics;
        let d = m.device(victim);
        out.push(SweepPoint { differential_db: diff, sent: d.sent, jammed: d.jammed, jam_pct: d.jam_pct() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_rows_increase_with_size() {
        let rows = timing_table(&RadioParams::sf(7), &SPREADING_FACTORS, &AIRTIME_SIZES, 5).unwrap();
        assert_eq!(rows.len(), 36);
        for w in rows.windows(2).filter(|w| w[0].sf == w[1].sf) {
            assert!(w[1].airtime_us > w[0].airtime_us);
        }
        let r = rows.iter().find(|r| r.sf == 7 && r.size == 17).unwrap();
        assert_eq!(r.airtime_us, 51_456);
        assert_eq!(r.window_us, r.airtime_us as i64 - r.read_point_us as i64);
    }

    #[test]
    fn faster_link_jams_more_cells() {
        let slow = Matrix::predict(&SPREADING_FACTORS, &MATRIX_SIZES, 5, LatencyModel::wormhole_ethernet()).unwrap();
        let fast = Matrix::predict(&SPREADING_FACTORS, &MATRIX_SIZES, 5, LatencyModel::new(Micros(10_000), Micros(1_700))).unwrap();
        assert!(fast.count(Jammability::Success, false) > slow.count(Jammability::Success, false));
        assert_eq!(slow.notes().len(), 1);
        assert!(slow.grid().starts_with("size\tSF7"));
    }

    #[test]
    fn simulated_cells_follow_the_clear_predictions() {
        let mut m = Matrix::predict(&[7, 12], &[17, 57], 5, LatencyModel::wormhole_ethernet()).unwrap();
        m.simulate(20, 3).unwrap();
        for c in m.cells.values() {
            assert_eq!(c.observed_class(), Some(c.predicted));
        }
        assert!(m.csv().lines().nth(1).unwrap().starts_with("7,17,"));
    }

    #[test]
    fn sweep_moves_the_jammer_only() {
        let s = rssi_sweep_scenario(36.0, 5, 1);
        let pts = rssi_sweep(&s, "target", "jammer", &[20.0, 40.0]).unwrap();
        assert_eq!((pts[0].jammed, pts[1].jammed), (0, 5));
    }
}
