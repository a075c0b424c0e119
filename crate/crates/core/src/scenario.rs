//! Declarative experiment description, read from TOML.
//!
//! Nodes are referred to by name. Gateways, devices and adversaries each
//! contribute names; a triggered or selective adversary is one node called
//! after the adversary, a wormhole contributes `<name>.sniffer` and
//! `<name>.jammer`. Durations accept integers (µs) or strings such as
//! `"60s"` and `"100.83ms"`. The field reference lives in `docs/scenario.md`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::actors::{ChannelPlan, DeviceConfig, JamPolicy, ReplayConfig, Traffic, UplinkKind};
use crate::codec::{AesKey, DevAddr, SessionKeys};
use crate::medium::{CaptureMatrix, LinkModel, NodeId};
use crate::num::Real;
use crate::phy::{Bandwidth, LatencyModel, Micros, RadioParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub duration: Micros,
    #[serde(default)]
    pub capture: CaptureSpec,
    #[serde(default)]
    pub links: LinkSpec,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub gateways: Vec<GatewaySpec>,
    #[serde(default)]
    pub devices: Vec<DeviceSpec>,
    #[serde(default)]
    pub adversaries: Vec<AdversarySpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapturePreset {
    /// Co-channel rejection table of the SX127x family.
    #[default]
    Goursaud,
    /// Every SF pair at `uniform_db`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSpec {
    #[serde(default)]
    pub preset: CapturePreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<CaptureOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureOverride {
    /// Spreading factor of the wanted signal.
    pub ds: u8,
    /// Spreading factor of the interferer.
    pub is: u8,
    pub db: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    /// RSSI used for every pair without an explicit entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<LinkEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub from: String,
    pub to: String,
    pub rssi_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub event_log: bool,
    #[serde(default = "yes")]
    pub metrics: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { event_log: true, metrics: true }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySpec {
    pub name: String,
    /// Empty listens on the eight EU868 uplink channels.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<u32>,
}

impl GatewaySpec {
    pub fn listen_channels(&self) -> Vec<u32> {
        if self.channels.is_empty() {
            crate::actors::device::EU868_OBSERVED.iter().map(|c| c.0).collect()
        } else {
            self.channels.clone()
        }
    }
}

/// PHY settings shared by devices and, through them, by the jammers that
/// answer at the victim's settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhySpec {
    pub sf: u8,
    #[serde(default = "default_bw")]
    pub bandwidth_hz: u32,
    #[serde(default = "default_cr")]
    pub coding_rate: u8,
    #[serde(default = "default_preamble")]
    pub preamble_symbols: u16,
    #[serde(default = "yes")]
    pub explicit_header: bool,
    #[serde(default = "yes")]
    pub crc_on: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_data_rate_opt: Option<bool>,
}

fn default_bw() -> u32 {
    Bandwidth::Khz125.hz()
}

fn default_cr() -> u8 {
    1
}

fn default_preamble() -> u16 {
    8
}

impl PhySpec {
    pub fn sf(sf: u8) -> Self {
        Self {
            sf,
            bandwidth_hz: default_bw(),
            coding_rate: default_cr(),
            preamble_symbols: default_preamble(),
            explicit_header: true,
            crc_on: true,
            low_data_rate_opt: None,
        }
    }

    pub fn build(&self) -> Result<RadioParams, ScenarioError> {
        let e = |err: crate::phy::PhyError| invalid(err.to_string());
        let mut p = RadioParams::new(self.sf, self.bandwidth_hz)
            .map_err(e)?
            .with_coding_rate(self.coding_rate)
            .map_err(e)?
            .with_preamble(self.preamble_symbols)
            .map_err(e)?
            .with_explicit_header(self.explicit_header)
            .with_crc(self.crc_on);
        if let Some(ldro) = self.low_data_rate_opt {
            p = p.with_low_data_rate_opt(ldro);
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelWeight {
    pub hz: u32,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub name: String,
    pub dev_addr: DevAddr,
    #[serde(with = "hex_key")]
    pub nwk_skey: AesKey,
    #[serde(with = "hex_key")]
    pub app_skey: AesKey,
    pub phy: PhySpec,
    /// Empty means the EU868 plan with observed city-scale weights.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<ChannelWeight>,
    pub traffic: Traffic,
    pub frame_size: usize,
    #[serde(default = "default_duty_cycle")]
    pub duty_cycle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_frames: Option<u32>,
    #[serde(default)]
    pub kind: UplinkKind,
    #[serde(default = "default_fport")]
    pub fport: u8,
    #[serde(default = "default_power")]
    pub tx_power_dbm: f64,
}

fn default_duty_cycle() -> f64 {
    0.01
}

fn default_fport() -> u8 {
    1
}

fn default_power() -> f64 {
    14.0
}

impl DeviceSpec {
    /// A periodic 17-byte uplinker on a single channel with test keys.
    pub fn periodic(name: &str, dev_addr: u32, sf: u8, channel_hz: u32, period: Micros, offset: Micros) -> Self {
        Self {
            name: name.to_string(),
            dev_addr: DevAddr(dev_addr),
            nwk_skey: derive_test_key(dev_addr, 1),
            app_skey: derive_test_key(dev_addr, 2),
            phy: PhySpec::sf(sf),
            channels: vec![ChannelWeight { hz: channel_hz, weight: 1.0 }],
            traffic: Traffic::Periodic { period, jitter: Micros::ZERO, offset },
            frame_size: 17,
            duty_cycle: default_duty_cycle(),
            max_frames: None,
            kind: UplinkKind::Unconfirmed,
            fport: default_fport(),
            tx_power_dbm: default_power(),
        }
    }

    pub fn keys(&self) -> SessionKeys {
        SessionKeys { nwk_skey: self.nwk_skey, app_skey: self.app_skey }
    }

    pub fn build(&self) -> Result<DeviceConfig, ScenarioError> {
        let plan = if self.channels.is_empty() {
            ChannelPlan::eu868_observed()
        } else {
            ChannelPlan::new(self.channels.iter().map(|c| (c.hz, c.weight)).collect())
                .map_err(|e| invalid(format!("device {}: {e}", self.name)))?
        };
        Ok(DeviceConfig {
            dev_addr: self.dev_addr,
            keys: self.keys(),
            params: self.phy.build().map_err(|e| invalid(format!("device {}: {e}", self.name)))?,
            plan,
            traffic: self.traffic.clone(),
            frame_size: self.frame_size,
            duty_cycle: Some(self.duty_cycle),
            max_frames: self.max_frames,
            kind: self.kind,
            fport: self.fport,
        })
    }
}

/// Deterministic, obviously fake key material for generated scenarios.
pub fn derive_test_key(dev_addr: u32, salt: u8) -> AesKey {
    let mut k = [salt; 16];
    k[..4].copy_from_slice(&dev_addr.to_be_bytes());
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    Triggered,
    Selective,
    Wormhole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub name: String,
    pub kind: AdversaryKind,
    pub channels: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sfs: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<JamPolicy>,
    #[serde(default = "default_read")]
    pub read_bytes: usize,
    #[serde(default = "default_decision_delay")]
    pub decision_delay: Micros,
    /// Victim symbols between the decision and the jam; defaults to 6 for a
    /// selective jammer and 0 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turnaround_symbols: Option<u32>,
    #[serde(default = "default_detect_delay")]
    pub detect_delay_symbols: u32,
    #[serde(default)]
    pub detection_miss: f64,
    #[serde(default)]
    pub rearm: Micros,
    #[serde(default = "default_jam_bytes")]
    pub jam_bytes: usize,
    #[serde(default = "default_power")]
    pub tx_power_dbm: f64,
    #[serde(default)]
    pub active_from: Micros,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_until: Option<Micros>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<ReplayConfig>,
}

fn default_read() -> usize {
    5
}

fn default_decision_delay() -> Micros {
    Micros::from_millis(1)
}

fn default_detect_delay() -> u32 {
    1
}

fn default_jam_bytes() -> usize {
    10
}

pub const SELECTIVE_TURNAROUND_SYMBOLS: u32 = 6;

impl AdversarySpec {
    pub fn new(name: &str, kind: AdversaryKind, channels: Vec<u32>) -> Self {
        Self {
            name: name.to_string(),
            kind,
            channels,
            sfs: Vec::new(),
            policy: None,
            read_bytes: default_read(),
            decision_delay: default_decision_delay(),
            turnaround_symbols: None,
            detect_delay_symbols: default_detect_delay(),
            detection_miss: 0.0,
            rearm: Micros::ZERO,
            jam_bytes: default_jam_bytes(),
            tx_power_dbm: default_power(),
            active_from: Micros::ZERO,
            active_until: None,
            latency: None,
            replay: None,
        }
    }

    pub fn turnaround(&self) -> u32 {
        self.turnaround_symbols.unwrap_or(match self.kind {
            AdversaryKind::Selective => SELECTIVE_TURNAROUND_SYMBOLS,
            _ => 0,
        })
    }

    /// Node names this adversary occupies: `(transmitter, listener)`.
    pub fn node_names(&self) -> Vec<String> {
        match self.kind {
            AdversaryKind::Wormhole => vec![format!("{}.sniffer", self.name), format!("{}.jammer", self.name)],
            _ => vec![self.name.clone()],
        }
    }
}

/// Node identities after name resolution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeMap {
    ids: BTreeMap<String, NodeId>,
    names: Vec<String>,
}

impl NodeMap {
    fn add(&mut self, name: String) -> Result<NodeId, ScenarioError> {
        if name.is_empty() {
            return Err(invalid("empty node name"));
        }
        let id = NodeId(self.names.len() as u32);
        if self.ids.insert(name.clone(), id).is_some() {
            return Err(invalid(format!("duplicate node name {name:?}")));
        }
        self.names.push(name);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl Scenario {
    pub fn new(seed: u64, duration: Micros) -> Self {
        Self {
            seed,
            duration,
            capture: CaptureSpec::default(),
            links: LinkSpec::default(),
            outputs: Outputs::default(),
            gateways: Vec::new(),
            devices: Vec::new(),
            adversaries: Vec::new(),
        }
    }

    /// Parses and validates. Syntax errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable")
    }

    /// Gateways, then devices, then adversary nodes, in file order.
    pub fn node_map(&self) -> Result<NodeMap, ScenarioError> {
        let mut m = NodeMap::default();
        for g in &self.gateways {
            m.add(g.name.clone())?;
        }
        for d in &self.devices {
            m.add(d.name.clone())?;
        }
        for a in &self.adversaries {
            for n in a.node_names() {
                m.add(n)?;
            }
        }
        Ok(m)
    }

    pub fn capture_matrix<T: Real>(&self) -> Result<CaptureMatrix<T>, ScenarioError> {
        let mut m = match self.capture.preset {
            CapturePreset::Goursaud => CaptureMatrix::goursaud(),
            CapturePreset::Uniform => {
                let v = self.capture.uniform_db.ok_or_else(|| invalid("capture preset uniform needs uniform_db"))?;
                CaptureMatrix::uniform(T::of(v))
            }
        };
        for o in &self.capture.overrides {
            m.set(o.ds, o.is, T::of(o.db)).map_err(|e| invalid(e.to_string()))?;
        }
        m.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(m)
    }

    /// RSSI matrix over every transmitter/receiver pair, explicit entries
    /// first, then the default.
    pub fn link_model<T: Real>(&self) -> Result<LinkModel<T>, ScenarioError> {
        let nodes = self.node_map()?;
        let mut links = LinkModel::new();
        if let Some(d) = self.links.default_dbm {
            if !d.is_finite() {
                return Err(invalid("links.default_dbm must be finite"));
            }
            for i in 0..nodes.len() as u32 {
                for j in 0..nodes.len() as u32 {
                    if i != j {
                        links.set(NodeId(i), NodeId(j), T::of(d));
                    }
                }
            }
        }
        for e in &self.links.entries {
            let from = nodes.id(&e.from).ok_or_else(|| invalid(format!("link from unknown node {:?}", e.from)))?;
            let to = nodes.id(&e.to).ok_or_else(|| invalid(format!("link to unknown node {:?}", e.to)))?;
            if !e.rssi_dbm.is_finite() {
                return Err(invalid(format!("link {} -> {} has non-finite RSSI", e.from, e.to)));
            }
            links.set(from, to, T::of(e.rssi_dbm));
        }
        Ok(links)
    }

    /// Receivers (gateways and sniffers) and transmitters (devices and
    /// adversary radios) whose pairwise RSSI the medium will need.
    fn required_links(&self) -> Vec<(String, String)> {
        let mut rx: Vec<String> = self.gateways.iter().map(|g| g.name.clone()).collect();
        let mut tx: Vec<String> = self.devices.iter().map(|d| d.name.clone()).collect();
        for a in &self.adversaries {
            match a.kind {
                AdversaryKind::Wormhole => {
                    rx.push(format!("{}.sniffer", a.name));
                    tx.push(format!("{}.jammer", a.name));
                }
                _ => tx.push(a.name.clone()),
            }
        }
        let mut out = Vec::new();
        for t in &tx {
            for r in &rx {
                out.push((t.clone(), r.clone()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let nodes = self.node_map()?;
        self.capture_matrix::<f64>()?;
        let links = self.link_model::<f64>()?;
        for (t, r) in self.required_links() {
            if !links.contains(nodes.id(&t).unwrap(), nodes.id(&r).unwrap()) {
                return Err(invalid(format!("no RSSI for link {t} -> {r} (add an entry or links.default_dbm)")));
            }
        }
        let mut addrs = BTreeSet::new();
        for d in &self.devices {
            if !addrs.insert(d.dev_addr) {
                return Err(invalid(format!("duplicate dev_addr {}", d.dev_addr)));
            }
            crate::actors::EndDevice::new(d.build()?).map_err(|e| invalid(format!("device {}: {e}", d.name)))?;
        }
        for a in &self.adversaries {
            self.validate_adversary(a)?;
        }
        Ok(())
    }

    fn validate_adversary(&self, a: &AdversarySpec) -> Result<(), ScenarioError> {
        let ctx = |m: &str| invalid(format!("adversary {}: {m}", a.name));
        if a.channels.is_empty() {
            return Err(ctx("channels must not be empty"));
        }
        if let Some(sf) = a.sfs.iter().find(|sf| !(7..=12).contains(*sf)) {
            return Err(ctx(&format!("spreading factor {sf} out of range")));
        }
        if !(0.0..=1.0).contains(&a.detection_miss) {
            return Err(ctx("detection_miss must be within [0, 1]"));
        }
        if a.jam_bytes == 0 {
            return Err(ctx("jam_bytes must be positive"));
        }
        if a.active_until.is_some_and(|u| u <= a.active_from) {
            return Err(ctx("active_until must be after active_from"));
        }
        match a.kind {
            AdversaryKind::Triggered => {
                if a.policy.is_some() || a.latency.is_some() || a.replay.is_some() {
                    return Err(ctx("a triggered jammer takes no policy, latency or replay"));
                }
            }
            AdversaryKind::Selective | AdversaryKind::Wormhole => {
                let policy = a.policy.clone().ok_or_else(|| ctx("policy is required"))?;
                policy.compile(a.read_bytes).map_err(|e| ctx(&e.to_string()))?;
                if a.kind == AdversaryKind::Selective && (a.latency.is_some() || a.replay.is_some()) {
                    return Err(ctx("latency and replay apply to wormholes only"));
                }
                if a.kind == AdversaryKind::Wormhole && a.latency.is_none() {
                    return Err(ctx("a wormhole needs a latency model"));
                }
            }
        }
        Ok(())
    }
}

mod hex_key {
    use super::*;

    pub fn serialize<S: Serializer>(k: &AesKey, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode_upper(k))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<AesKey, D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(s.trim()).map_err(serde::de::Error::custom)?;
        v.try_into().map_err(|v: Vec<u8>| serde::de::Error::custom(format!("key must be 16 bytes, got {}", v.len())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::MType;
    use proptest::prelude::*;

    const SAMPLE: &str = r#"
seed = 7
duration = "1h"

[capture]
overrides = [{ ds = 12, is = 12, db = 36.0 }]

[links]
default_dbm = -100.0
entries = [{ from = "jam", to = "gw", rssi_dbm = -40.0 }]

[[gateways]]
name = "gw"
channels = [868100000]

[[devices]]
name = "target"
dev_addr = "12345663"
nwk_skey = "2B7E151628AED2A6ABF7158809CF4F3C"
app_skey = "000102030405060708090A0B0C0D0E0F"
phy = { sf = 12 }
channels = [{ hz = 868100000 }]
traffic = { kind = "periodic", period = "5min", offset = "10s" }
frame_size = 17
max_frames = 10

[[adversaries]]
name = "jam"
kind = "selective"
channels = [868100000]
policy = { dev_addr = ["12345663"] }
"#;

    #[test]
    fn sample_parses() {
        let s = Scenario::from_toml(SAMPLE).unwrap();
        assert_eq!(s.duration, Micros::from_secs(3600));
        assert_eq!(s.devices[0].nwk_skey[0], 0x2B);
        assert_eq!(s.adversaries[0].turnaround(), 6);
        let m = s.capture_matrix::<f64>().unwrap();
        assert_eq!(m.threshold(12, 12), 36.0);
        let nodes = s.node_map().unwrap();
        assert_eq!((nodes.id("gw"), nodes.id("jam")), (Some(NodeId(0)), Some(NodeId(2))));
        let links = s.link_model::<f64>().unwrap();
        assert_eq!(links.get(NodeId(2), NodeId(0)), Some(-40.0));
        assert_eq!(links.get(NodeId(1), NodeId(0)), Some(-100.0));
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn syntax_errors_point_at_a_line() {
        let bad = SAMPLE.replace("frame_size = 17", "frame_size = \"x\"");
        let msg = Scenario::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 24"), "{msg}");
        let unknown = SAMPLE.replace("frame_size = 17", "frame_size = 17\ncolour = 1");
        assert!(Scenario::from_toml(&unknown).unwrap_err().to_string().contains("colour"));
    }

    #[test]
    fn seed_is_mandatory() {
        let msg = Scenario::from_toml(&SAMPLE.replace("seed = 7", "")).unwrap_err().to_string();
        assert!(msg.contains("seed"), "{msg}");
    }

    #[test]
    fn semantic_checks() {
        let no_links = SAMPLE.replace("default_dbm = -100.0", "");
        assert!(Scenario::from_toml(&no_links).unwrap_err().to_string().contains("target -> gw"));
        let deep = SAMPLE.replace("policy = { dev_addr = [\"12345663\"] }", "policy = { fcnt = { min = 0, max = 1 } }");
        assert!(Scenario::from_toml(&deep).unwrap_err().to_string().contains("first 8 bytes"));
        let dup = SAMPLE.replace("name = \"jam\"", "name = \"gw\"");
        assert!(Scenario::from_toml(&dup).unwrap_err().to_string().contains("duplicate"));
        let big = SAMPLE.replace("frame_size = 17", "frame_size = 60");
        assert!(Scenario::from_toml(&big).is_err());
        let short_key = SAMPLE.replace("2B7E151628AED2A6ABF7158809CF4F3C", "2B7E");
        assert!(Scenario::from_toml(&short_key).is_err());
        let wh = SAMPLE.replace("kind = \"selective\"", "kind = \"wormhole\"").replace("from = \"jam\"", "from = \"jam.jammer\"");
        assert!(Scenario::from_toml(&wh).unwrap_err().to_string().contains("latency"));
    }

    fn arb_policy() -> impl Strategy<Value = JamPolicy> {
        let leaf = prop_oneof![
            Just(JamPolicy::Any),
            proptest::collection::vec(any::<u32>().prop_map(DevAddr), 1..3).prop_map(JamPolicy::DevAddr),
            Just(JamPolicy::Mtype(vec![MType::JoinRequest, MType::UnconfirmedDataUp])),
            (0u16..100, 100u16..200).prop_map(|(min, max)| JamPolicy::Fcnt { min, max }),
        ];
        leaf.prop_recursive(2, 6, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 1..3).prop_map(JamPolicy::And),
                proptest::collection::vec(inner.clone(), 1..3).prop_map(JamPolicy::Or),
                inner.prop_map(|p| JamPolicy::Not(Box::new(p))),
            ]
        })
    }

    prop_compose! {
        fn arb_scenario()(
            seed in any::<u64>(),
            dur in 1u64..10_000_000_000,
            sf in 7u8..=12,
            addr in any::<u32>(),
            key in any::<[u8; 16]>(),
            period in 1u64..1_000_000_000,
            rssi in -140.0f64..0.0,
            size in 12usize..=51,
            policy in arb_policy(),
            miss in 0.0f64..=1.0,
            kind in prop_oneof![Just(AdversaryKind::Selective), Just(AdversaryKind::Wormhole)],
            ldro in proptest::option::of(any::<bool>()),
        ) -> Scenario {
            let mut s = Scenario::new(seed, Micros(dur));
            s.links.default_dbm = Some(rssi);
            s.gateways.push(GatewaySpec { name: "gw".into(), channels: vec![] });
            let mut d = DeviceSpec::periodic("d", addr, sf, 868_100_000, Micros(period), Micros::ZERO);
            d.nwk_skey = key;
            d.frame_size = size;
            d.phy.low_data_rate_opt = ldro;
            s.devices.push(d);
            let mut a = AdversarySpec::new("a", kind, vec![868_100_000]);
            a.policy = Some(policy);
            a.read_bytes = 8;
            a.detection_miss = miss;
            if kind == AdversaryKind::Wormhole {
                a.latency = Some(LatencyModel::wormhole_ethernet());
                a.replay = Some(ReplayConfig { start: Micros(5), interval: None });
            }
            s.adversaries.push(a);
            s
        }
    }

    proptest! {
        #[test]
        fn round_trip(s in arb_scenario()) {
            let text = s.to_toml();
            let back = Scenario::from_toml(&text).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
