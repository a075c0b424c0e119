//! Class A end devices sending unconfirmed uplinks under a duty-cycle gate.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore};
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError, DevAddr, FrameHeader, MType, Mhdr, SessionKeys, WireFrame, HEADER_OVERHEAD, MIN_DATA_FRAME};
use crate::phy::{self, Micros, PhyError, RadioParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("channel plan is empty or has no positive weight")]
    EmptyPlan,
    #[error("channel weight {0} is negative or not finite")]
    BadWeight(f64),
    #[error("duty cycle {0} outside (0, 1]")]
    BadDutyCycle(f64),
    #[error("frame size {size} outside {min}..={max}")]
    FrameSize { size: usize, min: usize, max: usize },
    #[error("traffic period must be positive")]
    ZeroPeriod,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

/// Weighted list of uplink channels.
#[derive(Debug, Clone)]
pub struct ChannelPlan {
    channels: Vec<(u32, f64)>,
    index: WeightedIndex<f64>,
}

impl PartialEq for ChannelPlan {
    fn eq(&self, other: &Self) -> bool {
        self.channels == other.channels
    }
}

impl ChannelPlan {
    pub fn new(channels: Vec<(u32, f64)>) -> Result<Self, DeviceError> {
        if let Some(&(_, w)) = channels.iter().find(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(DeviceError::BadWeight(w));
        }
        let index = WeightedIndex::new(channels.iter().map(|c| c.1)).map_err(|_| DeviceError::EmptyPlan)?;
        Ok(Self { channels, index })
    }

    pub fn single(channel_hz: u32) -> Self {
        Self::new(vec![(channel_hz, 1.0)]).expect("one positive weight")
    }

    /// The eight EU868 uplink channels weighted by the usage shares seen in a
    /// city-scale gateway log (868.1/868.3/868.5 carry about half the load).
    pub fn eu868_observed() -> Self {
        Self::new(EU868_OBSERVED.to_vec()).expect("static plan")
    }

    pub fn channels(&self) -> &[(u32, f64)] {
        &self.channels
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.channels[self.index.sample(rng)].0
    }
}

pub const EU868_OBSERVED: [(u32, f64); 8] = [
    (867_100_000, 0.091),
    (867_300_000, 0.107),
    (867_500_000, 0.089),
    (867_700_000, 0.103),
    (867_900_000, 0.096),
    (868_100_000, 0.171),
    (868_300_000, 0.187),
    (868_500_000, 0.156),
];

/// When a device wants to send.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Traffic {
    /// Slot `k` at `offset + k·period`, moved by a uniform draw in `±jitter`.
    Periodic {
        period: Micros,
        #[serde(default)]
        jitter: Micros,
        #[serde(default)]
        offset: Micros,
    },
    /// Exponential inter-arrival times.
    Poisson {
        mean: Micros,
        #[serde(default)]
        offset: Micros,
    },
    Explicit { times: Vec<Micros> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UplinkKind {
    #[default]
    Unconfirmed,
    Confirmed,
    JoinRequest,
}

#[derive(Debug, Clone)]
pub struct DeviceConfig {
    pub dev_addr: DevAddr,
    pub keys: SessionKeys,
    pub params: RadioParams,
    pub plan: ChannelPlan,
    pub traffic: Traffic,
    /// Wire length (PHY payload) of every uplink.
    pub frame_size: usize,
    /// `None` disables the gate.
    pub duty_cycle: Option<f64>,
    pub max_frames: Option<u32>,
    pub kind: UplinkKind,
    pub fport: u8,
}

/// Silence required after an uplink: `airtime·(1/dc − 1)`, rounded to µs.
pub fn off_time(airtime: Micros, duty_cycle: f64) -> Micros {
    Micros((airtime.0 as f64 * (1.0 / duty_cycle - 1.0)).round() as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uplink {
    pub channel_hz: u32,
    pub params: RadioParams,
    pub wire: WireFrame,
    pub fcnt: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attempt {
    Send(Uplink),
    /// The duty-cycle gate is closed until the given instant.
    Deferred(Micros),
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct EndDevice {
    cfg: DeviceConfig,
    fcnt: u32,
    sent: u32,
    slot: u64,
    gate_open: Micros,
    poisson: Option<Exp<f64>>,
}

impl EndDevice {
    pub fn new(cfg: DeviceConfig) -> Result<Self, DeviceError> {
        if let Some(dc) = cfg.duty_cycle {
            if !(dc > 0.0 && dc <= 1.0) {
                return Err(DeviceError::BadDutyCycle(dc));
            }
        }
        match cfg.kind {
            UplinkKind::JoinRequest => {}
            _ => {
                let max = cfg.params.max_frame_size();
                if cfg.frame_size < MIN_DATA_FRAME || cfg.frame_size > max {
                    return Err(DeviceError::FrameSize { size: cfg.frame_size, min: MIN_DATA_FRAME, max });
                }
            }
        }
        let poisson = match cfg.traffic {
            Traffic::Periodic { period, .. } if period.0 == 0 => return Err(DeviceError::ZeroPeriod),
            Traffic::Poisson { mean, .. } if mean.0 == 0 => return Err(DeviceError::ZeroPeriod),
            Traffic::Poisson { mean, .. } => Some(Exp::new(1.0 / mean.0 as f64).expect("positive rate")),
            _ => None,
        };
        Ok(Self { cfg, fcnt: 0, sent: 0, slot: 0, gate_open: Micros::ZERO, poisson })
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.cfg
    }

    pub fn dev_addr(&self) -> DevAddr {
        self.cfg.dev_addr
    }

    pub fn sent(&self) -> u32 {
        self.sent
    }

    pub fn frame_len(&self) -> usize {
        match self.cfg.kind {
            UplinkKind::JoinRequest => codec::JOIN_REQUEST_LEN,
            _ => self.cfg.frame_size,
        }
    }

    pub fn airtime(&self) -> Micros {
        phy::time_on_air(&self.cfg.params, self.frame_len()).expect("validated at construction")
    }

    fn exhausted(&self) -> bool {
        self.cfg.max_frames.is_some_and(|m| self.sent >= m) || self.fcnt > u16::MAX as u32
    }

    /// Time of the first uplink attempt.
    pub fn first_attempt<R: RngCore>(&mut self, rng: &mut R) -> Option<Micros> {
        self.next_attempt(Micros::ZERO, rng)
    }

    /// Next attempt after one made at `now`.
    pub fn next_attempt<R: RngCore>(&mut self, now: Micros, rng: &mut R) -> Option<Micros> {
        if self.exhausted() {
            return None;
        }
        let t = match &self.cfg.traffic {
            Traffic::Periodic { period, jitter, offset } => {
                let nominal = offset.0 as i64 + (self.slot * period.0) as i64;
                self.slot += 1;
                let j = jitter.0 as i64;
                let shift = if j > 0 { rng.random_range(-j..=j) } else { 0 };
                Micros((nominal + shift).max(0) as u64)
            }
            Traffic::Poisson { offset, .. } => {
                let base = if self.slot == 0 { *offset } else { now };
                self.slot += 1;
                let gap = self.poisson.as_ref().expect("set for poisson").sample(rng);
                base + Micros(gap.round() as u64)
            }
            Traffic::Explicit { times } => {
                let t = *times.get(self.slot as usize)?;
                self.slot += 1;
                t
            }
        };
        Some(t.max(now))
    }

    /// Tries to transmit at `now`.
    pub fn attempt<R: RngCore>(&mut self, now: Micros, rng: &mut R) -> Result<Attempt, DeviceError> {
        if self.exhausted() {
            return Ok(Attempt::Exhausted);
        }
        if now < self.gate_open {
            return Ok(Attempt::Deferred(self.gate_open));
        }
        let fcnt = self.fcnt as u16;
        let wire = self.build(fcnt, rng)?;
        let airtime = phy::time_on_air(&self.cfg.params, wire.len())?;
        self.gate_open = match self.cfg.duty_cycle {
            Some(dc) => now + airtime + off_time(airtime, dc),
            None => now + airtime,
        };
        self.fcnt += 1;
        self.sent += 1;
        Ok(Attempt::Send(Uplink { channel_hz: self.cfg.plan.sample(rng), params: self.cfg.params, wire, fcnt }))
    }

    fn build<R: RngCore>(&self, fcnt: u16, rng: &mut R) -> Result<WireFrame, DeviceError> {
        let c = &self.cfg;
        if c.kind == UplinkKind::JoinRequest {
            return Ok(codec::encode_join_request(0, c.dev_addr.0 as u64, fcnt, &c.keys.nwk_skey));
        }
        let mut header = FrameHeader::uplink(c.dev_addr, fcnt, None);
        if c.kind == UplinkKind::Confirmed {
            header.mhdr = Mhdr::new(MType::ConfirmedDataUp);
        }
        let mut plaintext = Vec::new();
        if c.frame_size >= HEADER_OVERHEAD {
            header.fport = Some(c.fport);
            plaintext = vec![0; c.frame_size - HEADER_OVERHEAD];
            rng.fill_bytes(&mut plaintext);
        }
        Ok(codec::encode(&header, &c.keys, &plaintext, c.params.max_frame_size())?)
    }
}
