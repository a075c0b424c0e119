//! LoRa physical-layer timing.
//!
//! Everything here is integer microseconds. Symbol times for the supported
//! parameter set are exact; the only rounding happens on the 4.25-symbol
//! sync term of the preamble, once per frame.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PhyError {
    #[error("spreading factor {0} outside 7..=12")]
    InvalidSpreadingFactor(u8),
    #[error("bandwidth {0} Hz not supported (125000 or 250000)")]
    InvalidBandwidth(u32),
    #[error("SF{sf} at {bandwidth_hz} Hz has no LoRaWAN data rate")]
    NoDataRate { sf: u8, bandwidth_hz: u32 },
    #[error("coding rate 4/{} invalid, CR must be in 1..=4", .0 + 4)]
    InvalidCodingRate(u8),
    #[error("preamble must be at least one symbol")]
    InvalidPreamble,
    #[error("payload of {len} bytes exceeds the {max}-byte maximum for DR{data_rate}")]
    PayloadTooLarge { len: usize, max: usize, data_rate: u8 },
    #[error("payload must be at least one byte")]
    EmptyPayload,
    #[error("read depth {read} must be within 1..={payload}")]
    InvalidReadDepth { read: usize, payload: usize },
}

/// A non-negative span or instant on the simulation clock, in microseconds.
///
/// Serialises as a bare integer. Deserialises from an integer or from a
/// string with a unit suffix (`"100.83ms"`, `"60s"`, `"10min"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct Micros(pub u64);

impl FromStr for Micros {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let split = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let scale = match unit.trim() {
            "" | "us" => 1.0,
            "ms" => 1e3,
            "s" => 1e6,
            "min" => 60e6,
            "h" => 3600e6,
            other => return Err(format!("unknown time unit {other:?} in {s:?}")),
        };
        let v: f64 = num.parse().map_err(|_| format!("invalid duration {s:?}"))?;
        Ok(Micros((v * scale).round() as u64))
    }
}

impl<'de> Deserialize<'de> for Micros {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Micros(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Micros {
    pub const ZERO: Micros = Micros(0);

    pub const fn from_millis(ms: u64) -> Self {
        Micros(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        Micros(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond; negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        Micros((s * 1e6).round().max(0.0) as u64)
    }

    pub fn from_millis_f64(ms: f64) -> Self {
        Micros((ms * 1e3).round().max(0.0) as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: Micros) -> Micros {
        Micros(self.0.saturating_sub(rhs.0))
    }

    pub fn signed_diff(self, rhs: Micros) -> i64 {
        self.0 as i64 - rhs.0 as i64
    }
}

impl Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl AddAssign for Micros {
    fn add_assign(&mut self, rhs: Micros) {
        self.0 += rhs.0;
    }
}

impl Sub for Micros {
    type Output = Micros;
    fn sub(self, rhs: Micros) -> Micros {
        Micros(self.0 - rhs.0)
    }
}

impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bandwidth {
    #[serde(rename = "125000")]
    Khz125,
    #[serde(rename = "250000")]
    Khz250,
}

impl Bandwidth {
    pub fn from_hz(hz: u32) -> Result<Self, PhyError> {
        match hz {
            125_000 => Ok(Bandwidth::Khz125),
            250_000 => Ok(Bandwidth::Khz250),
            other => Err(PhyError::InvalidBandwidth(other)),
        }
    }

    pub fn hz(self) -> u32 {
        match self {
            Bandwidth::Khz125 => 125_000,
            Bandwidth::Khz250 => 250_000,
        }
    }
}

/// EU868 LoRa data rates and their maximum frame sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DataRate {
    pub index: u8,
    pub sf: u8,
    pub bandwidth: Bandwidth,
    pub max_frame_size: usize,
}

pub const DATA_RATES: [DataRate; 7] = [
    DataRate { index: 0, sf: 12, bandwidth: Bandwidth::Khz125, max_frame_size: 59 },
    DataRate { index: 1, sf: 11, bandwidth: Bandwidth::Khz125, max_frame_size: 59 },
    DataRate { index: 2, sf: 10, bandwidth: Bandwidth::Khz125, max_frame_size: 59 },
    DataRate { index: 3, sf: 9, bandwidth: Bandwidth::Khz125, max_frame_size: 123 },
    DataRate { index: 4, sf: 8, bandwidth: Bandwidth::Khz125, max_frame_size: 230 },
    DataRate { index: 5, sf: 7, bandwidth: Bandwidth::Khz125, max_frame_size: 230 },
    DataRate { index: 6, sf: 7, bandwidth: Bandwidth::Khz250, max_frame_size: 230 },
];

pub fn data_rate(sf: u8, bandwidth: Bandwidth) -> Option<DataRate> {
    DATA_RATES
        .iter()
        .copied()
        .find(|dr| dr.sf == sf && dr.bandwidth == bandwidth)
}

/// Complete LoRa modulation configuration of one transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RadioParams {
    sf: u8,
    bandwidth: Bandwidth,
    coding_rate: u8,
    preamble_symbols: u16,
    explicit_header: bool,
    crc_on: bool,
    low_data_rate_opt: bool,
}

impl RadioParams {
    /// LoRaWAN uplink defaults: CR 4/5, 8-symbol preamble, explicit header,
    /// CRC on, LDRO on for SF11/SF12 at 125 kHz.
    pub fn new(sf: u8, bandwidth_hz: u32) -> Result<Self, PhyError> {
        if !(7..=12).contains(&sf) {
            return Err(PhyError::InvalidSpreadingFactor(sf));
        }
        let bandwidth = Bandwidth::from_hz(bandwidth_hz)?;
        if data_rate(sf, bandwidth).is_none() {
            return Err(PhyError::NoDataRate { sf, bandwidth_hz });
        }
        Ok(Self {
            sf,
            bandwidth,
            coding_rate: 1,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
            low_data_rate_opt: default_ldro(sf, bandwidth),
        })
    }

    /// 125 kHz with defaults. Panics on an SF outside 7..=12.
    pub fn sf(sf: u8) -> Self {
        Self::new(sf, 125_000).expect("SF in 7..=12")
    }

    pub fn with_coding_rate(mut self, cr: u8) -> Result<Self, PhyError> {
        if !(1..=4).contains(&cr) {
            return Err(PhyError::InvalidCodingRate(cr));
        }
        self.coding_rate = cr;
        Ok(self)
    }

    pub fn with_preamble(mut self, symbols: u16) -> Result<Self, PhyError> {
        if symbols == 0 {
            return Err(PhyError::InvalidPreamble);
        }
        self.preamble_symbols = symbols;
        Ok(self)
    }

    pub fn with_explicit_header(mut self, on: bool) -> Self {
        self.explicit_header = on;
        self
    }

    pub fn with_crc(mut self, on: bool) -> Self {
        self.crc_on = on;
        self
    }

    pub fn with_low_data_rate_opt(mut self, on: bool) -> Self {
        self.low_data_rate_opt = on;
        self
    }

    pub fn spreading_factor(&self) -> u8 {
        self.sf
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    pub fn coding_rate(&self) -> u8 {
        self.coding_rate
    }

    pub fn preamble_symbols(&self) -> u16 {
        self.preamble_symbols
    }

    pub fn explicit_header(&self) -> bool {
        self.explicit_header
    }

    pub fn crc_on(&self) -> bool {
        self.crc_on
    }

    pub fn low_data_rate_opt(&self) -> bool {
        self.low_data_rate_opt
    }

    pub fn data_rate(&self) -> DataRate {
        data_rate(self.sf, self.bandwidth).expect("validated at construction")
    }

    pub fn max_frame_size(&self) -> usize {
        self.data_rate().max_frame_size
    }

    fn check_payload(&self, len: usize) -> Result<(), PhyError> {
        let dr = self.data_rate();
        if len == 0 {
            return Err(PhyError::EmptyPayload);
        }
        if len > dr.max_frame_size {
            return Err(PhyError::PayloadTooLarge { len, max: dr.max_frame_size, data_rate: dr.index });
        }
        Ok(())
    }
}

impl fmt::Display for RadioParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SF{}/{}kHz CR4/{} pre{}{}{}{}",
            self.sf,
            self.bandwidth.hz() / 1000,
            self.coding_rate + 4,
            self.preamble_symbols,
            if self.explicit_header { "" } else { " implicit" },
            if self.crc_on { "" } else { " nocrc" },
            if self.low_data_rate_opt { " ldro" } else { "" },
        )
    }
}

pub fn default_ldro(sf: u8, bandwidth: Bandwidth) -> bool {
    sf >= 11 && bandwidth == Bandwidth::Khz125
}

/// Duration of one chirp, 2^SF / BW.
pub fn symbol_time(params: &RadioParams) -> Micros {
    // 10^6 / BW is 8 us at 125 kHz and 4 us at 250 kHz, so this is exact.
    let us_per_chip = 1_000_000 / params.bandwidth.hz() as u64;
    Micros((1u64 << params.sf) * us_per_chip)
}

/// Preamble plus sync word: (n_preamble + 4.25) symbols.
pub fn preamble_time(params: &RadioParams) -> Micros {
    let quarter_symbols = 4 * params.preamble_symbols as u64 + 17;
    let num = quarter_symbols * symbol_time(params).0;
    Micros((num + 2) / 4)
}

/// Number of payload symbols (header block included) for a PHY payload.
pub fn payload_symbols(params: &RadioParams, payload_len: usize) -> u64 {
    let sf = params.sf as i64;
    let de = params.low_data_rate_opt as i64;
    let ih = !params.explicit_header as i64;
    let crc = params.crc_on as i64;
    let num = 8 * payload_len as i64 - 4 * sf + 28 + 16 * crc - 20 * ih;
    let den = 4 * (sf - 2 * de);
    let blocks = if num > 0 { (num + den - 1) / den } else { 0 };
    (8 + blocks * (params.coding_rate as i64 + 4)) as u64
}

/// Total time a frame with a `payload_len`-byte PHY payload occupies the channel.
pub fn time_on_air(params: &RadioParams, payload_len: usize) -> Result<Micros, PhyError> {
    params.check_payload(payload_len)?;
    Ok(preamble_time(params) + payload_block_time(params, payload_len))
}

fn payload_block_time(params: &RadioParams, payload_len: usize) -> Micros {
    Micros(payload_symbols(params, payload_len) * symbol_time(params).0)
}

/// Completion time of every payload byte relative to frame start.
///
/// Entry `k - 1` is the instant byte `k` (1-indexed) has been fully sent.
/// The payload-symbol block is spread linearly over the bytes, so the last
/// entry equals [`time_on_air`].
pub fn byte_timeline(params: &RadioParams, payload_len: usize) -> Result<Vec<Micros>, PhyError> {
    params.check_payload(payload_len)?;
    let pre = preamble_time(params);
    let block = payload_block_time(params, payload_len).0;
    let n = payload_len as u64;
    Ok((1..=n).map(|k| pre + Micros(block * k / n)).collect())
}

/// Time budget between the jam decision point (prefix of `read_bytes`
/// available) and the end of the frame. Negative when the prefix frame is
/// longer than the full one, which can only happen with odd parameters.
pub fn jamming_window(params: &RadioParams, payload_len: usize, read_bytes: usize) -> Result<i64, PhyError> {
    if read_bytes == 0 || read_bytes > payload_len {
        return Err(PhyError::InvalidReadDepth { read: read_bytes, payload: payload_len });
    }
    let full = time_on_air(params, payload_len)?;
    let prefix = time_on_air(params, read_bytes)?;
    Ok(full.signed_diff(prefix))
}

/// Instant (relative to frame start) at which a receiver holds the first
/// `read_bytes` bytes of the frame.
pub fn read_point(params: &RadioParams, read_bytes: usize) -> Result<Micros, PhyError> {
    time_on_air(params, read_bytes)
}

/// Reaction latency of an attacker chain (Gaussian, truncated at zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub mean: Micros,
    pub std: Micros,
}

impl LatencyModel {
    pub fn new(mean: Micros, std: Micros) -> Self {
        Self { mean, std }
    }

    /// The measured sniffer-to-jammer chain over UDP/Ethernet.
    pub fn wormhole_ethernet() -> Self {
        Self::new(Micros(100_830), Micros(1_700))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Jammability {
    /// Window clears the latency band plus one symbol of guard.
    Success,
    /// Window falls inside the latency band.
    Mixed,
    /// Window at or below the fast edge of the latency band.
    Failure,
}

impl Jammability {
    pub fn letter(self) -> char {
        match self {
            Jammability::Success => 'S',
            Jammability::Mixed => 'M',
            Jammability::Failure => 'F',
        }
    }

    /// Classifies an observed jam rate: S above 95 %, F at exactly zero.
    pub fn from_rate(jammed: usize, total: usize) -> Self {
        if jammed == 0 {
            Jammability::Failure
        } else if jammed as f64 / total.max(1) as f64 > 0.95 {
            Jammability::Success
        } else {
            Jammability::Mixed
        }
    }
}

impl fmt::Display for Jammability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Predicts whether a reactive jammer with the given latency can hit a frame.
pub fn predict_jammable(
    params: &RadioParams,
    payload_len: usize,
    read_bytes: usize,
    latency: &LatencyModel,
) -> Result<Jammability, PhyError> {
    let window = jamming_window(params, payload_len, read_bytes)?;
    let mu = latency.mean.0 as i64;
    let spread = 3 * latency.std.0 as i64;
    let guard = symbol_time(params).0 as i64;
    Ok(if window >= mu + spread + guard {
        Jammability::Success
    } else if window <= mu - spread {
        Jammability::Failure
    } else {
        Jammability::Mixed
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Datasheet formula evaluated in floating point, independent of the
    /// integer path above.
    #[allow(clippy::too_many_arguments)]
    fn airtime_oracle(sf: u8, bw: f64, cr: u8, pre: u16, explicit: bool, crc: bool, ldro: bool, pl: usize) -> f64 {
        let tsym = 2f64.powi(sf as i32) / bw;
        let h = if explicit { 0.0 } else { 1.0 };
        let de = if ldro { 1.0 } else { 0.0 };
        let crc = if crc { 1.0 } else { 0.0 };
        let n = ((8.0 * pl as f64 - 4.0 * sf as f64 + 28.0 + 16.0 * crc - 20.0 * h)
            / (4.0 * (sf as f64 - 2.0 * de)))
            .ceil()
            * (cr as f64 + 4.0);
        let n_payload = 8.0 + n.max(0.0);
        ((pre as f64 + 4.25) * tsym + n_payload * tsym) * 1e6
    }

    #[test]
    fn duration_text() {
        assert_eq!("100.83ms".parse(), Ok(Micros(100_830)));
        assert_eq!("60s".parse(), Ok(Micros::from_secs(60)));
        assert_eq!(" 2 min".parse(), Ok(Micros::from_secs(120)));
        assert_eq!("1500".parse(), Ok(Micros(1500)));
        assert!("-1s".parse::<Micros>().is_err());
        assert!("5 days".parse::<Micros>().is_err());
        let v: Vec<Micros> = serde_json::from_str(r#"[7, "1h"]"#).unwrap();
        assert_eq!(v, [Micros(7), Micros::from_secs(3600)]);
        assert_eq!(serde_json::to_string(&Micros(5)).unwrap(), "5");
    }

    #[test]
    fn symbol_time_examples() {
        assert_eq!(symbol_time(&RadioParams::sf(7)), Micros(1024));
        assert_eq!(symbol_time(&RadioParams::sf(12)), Micros(32768));
        assert_eq!(symbol_time(&RadioParams::new(7, 250_000).unwrap()), Micros(512));
    }

    #[test]
    fn symbol_time_scaling() {
        for sf in 7..12 {
            let a = symbol_time(&RadioParams::sf(sf)).0;
            let b = symbol_time(&RadioParams::sf(sf + 1)).0;
            assert_eq!(b, 2 * a);
        }
    }

    #[test]
    fn airtime_examples() {
        assert_eq!(time_on_air(&RadioParams::sf(7), 17).unwrap(), Micros(51_456));
        let sf12 = RadioParams::sf(12);
        assert!(sf12.low_data_rate_opt());
        assert_eq!(time_on_air(&sf12, 17).unwrap(), Micros(1_318_912));
    }

    #[test]
    fn airtime_matches_float_oracle() {
        for sf in 7..=12u8 {
            for cr in 1..=4u8 {
                for &(explicit, crc) in &[(true, true), (false, true), (true, false), (false, false)] {
                    for ldro in [false, true] {
                        let p = RadioParams::sf(sf)
                            .with_coding_rate(cr)
                            .unwrap()
                            .with_explicit_header(explicit)
                            .with_crc(crc)
                            .with_low_data_rate_opt(ldro);
                        for pl in 1..=p.max_frame_size() {
                            let want = airtime_oracle(sf, 125e3, cr, 8, explicit, crc, ldro, pl);
                            assert_eq!(time_on_air(&p, pl).unwrap().0 as f64, want.round(), "{p} pl={pl}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn payload_limits() {
        let p = RadioParams::sf(12);
        assert!(time_on_air(&p, 59).is_ok());
        assert_eq!(
            time_on_air(&p, 60),
            Err(PhyError::PayloadTooLarge { len: 60, max: 59, data_rate: 0 })
        );
        assert_eq!(time_on_air(&p, 0), Err(PhyError::EmptyPayload));
        assert!(time_on_air(&RadioParams::sf(9), 123).is_ok());
        assert!(time_on_air(&RadioParams::sf(9), 124).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert_eq!(RadioParams::new(6, 125_000), Err(PhyError::InvalidSpreadingFactor(6)));
        assert_eq!(RadioParams::new(7, 500_000), Err(PhyError::InvalidBandwidth(500_000)));
        assert_eq!(RadioParams::new(8, 250_000), Err(PhyError::NoDataRate { sf: 8, bandwidth_hz: 250_000 }));
        assert!(RadioParams::sf(7).with_coding_rate(5).is_err());
        assert!(RadioParams::sf(7).with_preamble(0).is_err());
    }

    #[test]
    fn ldro_default_policy() {
        for sf in 7..=12 {
            assert_eq!(RadioParams::sf(sf).low_data_rate_opt(), sf >= 11);
        }
        assert!(!RadioParams::new(7, 250_000).unwrap().low_data_rate_opt());
    }

    #[test]
    fn airtime_strictly_increasing_in_sf() {
        for pl in [5, 17, 27, 37, 47, 57] {
            let mut prev = 0;
            for sf in 7..=12 {
                let t = time_on_air(&RadioParams::sf(sf), pl).unwrap().0;
                assert!(t > prev);
                prev = t;
                let fixed = RadioParams::sf(sf).with_low_data_rate_opt(false);
                if sf > 7 {
                    let lower = RadioParams::sf(sf - 1).with_low_data_rate_opt(false);
                    assert!(time_on_air(&fixed, pl).unwrap() > time_on_air(&lower, pl).unwrap());
                }
            }
        }
    }

    #[test]
    fn timeline_ends_at_airtime_and_increases() {
        for sf in 7..=12 {
            let p = RadioParams::sf(sf);
            for pl in 1..=p.max_frame_size() {
                let tl = byte_timeline(&p, pl).unwrap();
                assert_eq!(tl.len(), pl);
                assert_eq!(*tl.last().unwrap(), time_on_air(&p, pl).unwrap());
                assert!(tl[0] > preamble_time(&p));
                assert!(tl.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn fifth_byte_before_read_point_plus_symbol() {
        let p = RadioParams::sf(9);
        let tl = byte_timeline(&p, 17).unwrap();
        assert!(tl[4] < time_on_air(&p, 5).unwrap() + symbol_time(&p));
    }

    #[test]
    fn window_examples() {
        assert_eq!(jamming_window(&RadioParams::sf(9), 17, 5).unwrap(), 40_960);
        assert_eq!(jamming_window(&RadioParams::sf(9), 27, 5).unwrap(), 102_400);
        assert_eq!(jamming_window(&RadioParams::sf(7), 57, 5).unwrap(), 76_800);
        assert_eq!(jamming_window(&RadioParams::sf(10), 17, 5).unwrap(), 81_920);
        assert!(jamming_window(&RadioParams::sf(9), 4, 5).is_err());
        assert!(jamming_window(&RadioParams::sf(9), 17, 0).is_err());
    }

    #[test]
    fn prediction_examples() {
        let lat = LatencyModel::wormhole_ethernet();
        assert_eq!(predict_jammable(&RadioParams::sf(12), 17, 5, &lat).unwrap(), Jammability::Success);
        for pl in [17, 27, 37, 47, 57] {
            assert_eq!(predict_jammable(&RadioParams::sf(7), pl, 5, &lat).unwrap(), Jammability::Failure);
        }
        assert_eq!(predict_jammable(&RadioParams::sf(10), 17, 5, &lat).unwrap(), Jammability::Failure);
        assert_eq!(predict_jammable(&RadioParams::sf(9), 27, 5, &lat).unwrap(), Jammability::Mixed);
    }

    #[test]
    fn rate_classification() {
        assert_eq!(Jammability::from_rate(0, 100), Jammability::Failure);
        assert_eq!(Jammability::from_rate(95, 100), Jammability::Mixed);
        assert_eq!(Jammability::from_rate(96, 100), Jammability::Success);
        assert_eq!(Jammability::from_rate(1, 100), Jammability::Mixed);
    }

    proptest::proptest! {
        #[test]
        fn window_plus_prefix_is_total(sf in 7u8..=12, pl in 1usize..=59, read in 1usize..=59) {
            let p = RadioParams::sf(sf);
            proptest::prop_assume!(read <= pl);
            let w = jamming_window(&p, pl, read).unwrap();
            let total = time_on_air(&p, pl).unwrap().0 as i64;
            let prefix = time_on_air(&p, read).unwrap().0 as i64;
            proptest::prop_assert_eq!(w + prefix, total);
        }

        #[test]
        fn airtime_monotone_in_payload(sf in 7u8..=12, cr in 1u8..=4, pl in 1usize..59, explicit: bool, crc: bool) {
            let p = RadioParams::sf(sf).with_coding_rate(cr).unwrap().with_explicit_header(explicit).with_crc(crc);
            proptest::prop_assert!(time_on_air(&p, pl + 1).unwrap() >= time_on_air(&p, pl).unwrap());
        }
    }
}
