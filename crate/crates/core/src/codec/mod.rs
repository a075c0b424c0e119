//! LoRaWAN 1.0 uplink frames.
//!
//! Wire layout (multi-byte fields little-endian):
//!
//! ```text
//! MHDR | DevAddr(4) | FCtrl | FCnt(2) | FOpts(0..15) | [FPort | FRMPayload] | MIC(4)
//! ```
//!
//! Everything up to and including FPort travels in the clear, which is what
//! [`decode_prefix`] relies on: a listener can classify a frame from its first
//! few bytes without any key material.

pub mod crypto;
pub mod hexdump;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crypto::{Aes128, BlockCipher};

/// MHDR + FHDR(7) + MIC; a frame without FOpts and FPort.
pub const MIN_DATA_FRAME: usize = 12;
/// Header overhead of a data frame carrying an FPort and no FOpts.
pub const HEADER_OVERHEAD: usize = 13;
pub const JOIN_REQUEST_LEN: usize = 23;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("frame of {len} bytes exceeds the {max}-byte limit")]
    PayloadTooLarge { len: usize, max: usize },
    #[error("non-empty payload requires an FPort")]
    MissingFPort,
    #[error("FOpts length {len} does not match FCtrl nibble {nibble}")]
    FOptsLength { len: usize, nibble: usize },
    #[error("frame too short: {len} bytes, need {need}")]
    TooShort { len: usize, need: usize },
    #[error("reserved message type in MHDR 0x{mhdr:02X}")]
    UnknownMType { mhdr: u8 },
    #[error("{0:?} is not a data frame")]
    NotDataFrame(MType),
    #[error("invalid hex: {0}")]
    Hex(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MType {
    JoinRequest,
    JoinAccept,
    UnconfirmedDataUp,
    UnconfirmedDataDown,
    ConfirmedDataUp,
    ConfirmedDataDown,
    Rfu,
    Proprietary,
}

impl MType {
    pub fn bits(self) -> u8 {
        match self {
            MType::JoinRequest => 0,
            MType::JoinAccept => 1,
            MType::UnconfirmedDataUp => 2,
            MType::UnconfirmedDataDown => 3,
            MType::ConfirmedDataUp => 4,
            MType::ConfirmedDataDown => 5,
            MType::Rfu => 6,
            MType::Proprietary => 7,
        }
    }

    pub fn from_bits(bits: u8) -> Self {
        match bits & 0x07 {
            0 => MType::JoinRequest,
            1 => MType::JoinAccept,
            2 => MType::UnconfirmedDataUp,
            3 => MType::UnconfirmedDataDown,
            4 => MType::ConfirmedDataUp,
            5 => MType::ConfirmedDataDown,
            6 => MType::Rfu,
            _ => MType::Proprietary,
        }
    }

    pub fn is_data(self) -> bool {
        matches!(
            self,
            MType::UnconfirmedDataUp | MType::UnconfirmedDataDown | MType::ConfirmedDataUp | MType::ConfirmedDataDown
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mhdr(pub u8);

impl Mhdr {
    pub fn new(mtype: MType) -> Self {
        Mhdr(mtype.bits() << 5)
    }

    pub fn mtype(self) -> MType {
        MType::from_bits(self.0 >> 5)
    }

    pub fn major(self) -> u8 {
        self.0 & 0x03
    }
}

/// 32-bit device address. Displayed and parsed as 8 hex digits, MSB first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DevAddr(pub u32);

impl fmt::Display for DevAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08X}", self.0)
    }
}

impl FromStr for DevAddr {
    type Err = CodecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim_start_matches("0x");
        if s.len() != 8 {
            return Err(CodecError::Hex(format!("device address {s:?} must be 8 hex digits")));
        }
        u32::from_str_radix(s, 16)
            .map(DevAddr)
            .map_err(|e| CodecError::Hex(e.to_string()))
    }
}

impl Serialize for DevAddr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DevAddr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub type AesKey = [u8; 16];

/// ABP session keys. `Debug` never prints key material.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKeys {
    pub nwk_skey: AesKey,
    pub app_skey: AesKey,
}

impl fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SessionKeys { .. }")
    }
}

/// Header fields of a data frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameHeader {
    pub mhdr: Mhdr,
    pub dev_addr: DevAddr,
    pub fctrl: u8,
    pub fcnt: u16,
    pub fopts: Vec<u8>,
    pub fport: Option<u8>,
}

impl FrameHeader {
    pub fn uplink(dev_addr: DevAddr, fcnt: u16, fport: Option<u8>) -> Self {
        Self {
            mhdr: Mhdr::new(MType::UnconfirmedDataUp),
            dev_addr,
            fctrl: 0,
            fcnt,
            fopts: Vec::new(),
            fport,
        }
    }

    fn encoded_len(&self) -> usize {
        1 + 7 + self.fopts.len() + self.fport.is_some() as usize
    }
}

/// A data frame as carried on the wire; `frm_payload` is ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub header: FrameHeader,
    pub frm_payload: Vec<u8>,
    pub mic: [u8; 4],
}

/// Raw PHY payload plus the PHY CRC verdict set by the medium.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WireFrame {
    pub bytes: Vec<u8>,
    pub crc_ok: bool,
}

impl WireFrame {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self { bytes, crc_ok: true }
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

pub fn encode(header: &FrameHeader, keys: &SessionKeys, plaintext: &[u8], max_frame_size: usize) -> Result<WireFrame, CodecError> {
    encode_with::<Aes128>(header, keys, plaintext, max_frame_size)
}

/// Builds an uplink: encrypts `plaintext` (AppSKey, or NwkSKey for FPort 0)
/// and appends the MIC.
pub fn encode_with<C: BlockCipher>(
    header: &FrameHeader,
    keys: &SessionKeys,
    plaintext: &[u8],
    max_frame_size: usize,
) -> Result<WireFrame, CodecError> {
    let nibble = (header.fctrl & 0x0F) as usize;
    if header.fopts.len() != nibble {
        return Err(CodecError::FOptsLength { len: header.fopts.len(), nibble });
    }
    if !plaintext.is_empty() && header.fport.is_none() {
        return Err(CodecError::MissingFPort);
    }
    let len = header.encoded_len() + plaintext.len() + 4;
    if len > max_frame_size {
        return Err(CodecError::PayloadTooLarge { len, max: max_frame_size });
    }

    let mut bytes = Vec::with_capacity(len);
    bytes.push(header.mhdr.0);
    bytes.extend_from_slice(&header.dev_addr.0.to_le_bytes());
    bytes.push(header.fctrl);
    bytes.extend_from_slice(&header.fcnt.to_le_bytes());
    bytes.extend_from_slice(&header.fopts);
    if let Some(port) = header.fport {
        bytes.push(port);
        let key = if port == 0 { &keys.nwk_skey } else { &keys.app_skey };
        let start = bytes.len();
        bytes.extend_from_slice(plaintext);
        crypto::apply_keystream::<C>(key, true, header.dev_addr.0, header.fcnt as u32, &mut bytes[start..]);
    }
    let mic = crypto::data_mic::<C>(&keys.nwk_skey, true, header.dev_addr.0, header.fcnt as u32, &bytes);
    bytes.extend_from_slice(&mic);
    Ok(WireFrame::new(bytes))
}

/// Parses the cleartext structure of a complete data frame.
pub fn decode(wire: &[u8]) -> Result<Frame, CodecError> {
    if wire.len() < MIN_DATA_FRAME {
        return Err(CodecError::TooShort { len: wire.len(), need: MIN_DATA_FRAME });
    }
    let mhdr = Mhdr(wire[0]);
    match mhdr.mtype() {
        MType::Rfu => return Err(CodecError::UnknownMType { mhdr: wire[0] }),
        t if !t.is_data() => return Err(CodecError::NotDataFrame(t)),
        _ => {}
    }
    let fctrl = wire[5];
    let fopts_len = (fctrl & 0x0F) as usize;
    let fhdr_end = 8 + fopts_len;
    let mic_start = wire.len() - 4;
    if fhdr_end > mic_start {
        return Err(CodecError::TooShort { len: wire.len(), need: fhdr_end + 4 });
    }
    let (fport, frm_payload) = if mic_start > fhdr_end {
        (Some(wire[fhdr_end]), wire[fhdr_end + 1..mic_start].to_vec())
    } else {
        (None, Vec::new())
    };
    Ok(Frame {
        header: FrameHeader {
            mhdr,
            dev_addr: DevAddr(u32::from_le_bytes(wire[1..5].try_into().unwrap())),
            fctrl,
            fcnt: u16::from_le_bytes([wire[6], wire[7]]),
            fopts: wire[8..fhdr_end].to_vec(),
            fport,
        },
        frm_payload,
        mic: wire[mic_start..].try_into().unwrap(),
    })
}

/// Header fields recoverable from the first bytes of a frame still on air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Prefix {
    pub mhdr: Option<Mhdr>,
    pub dev_addr: Option<DevAddr>,
    pub fctrl: Option<u8>,
    pub fcnt: Option<u16>,
    /// The byte after FOpts. For a frame without payload this is already MIC,
    /// which a prefix reader cannot distinguish.
    pub fport: Option<u8>,
}

impl Prefix {
    /// Number of bytes a prefix must hold to expose the given field set.
    pub const DEV_ADDR_DEPTH: usize = 5;
    pub const FCNT_DEPTH: usize = 8;
}

pub fn decode_prefix(bytes: &[u8]) -> Prefix {
    let fctrl = bytes.get(5).copied();
    Prefix {
        mhdr: bytes.first().map(|&b| Mhdr(b)),
        dev_addr: bytes.get(1..5).map(|a| DevAddr(u32::from_le_bytes(a.try_into().unwrap()))),
        fctrl,
        fcnt: bytes.get(6..8).map(|c| u16::from_le_bytes([c[0], c[1]])),
        fport: fctrl.and_then(|f| bytes.get(8 + (f & 0x0F) as usize).copied()),
    }
}

pub fn verify_mic(wire: &[u8], keys: &SessionKeys) -> bool {
    verify_mic_with::<Aes128>(wire, keys)
}

pub fn verify_mic_with<C: BlockCipher>(wire: &[u8], keys: &SessionKeys) -> bool {
    if wire.len() < MIN_DATA_FRAME {
        return false;
    }
    let (msg, mic) = wire.split_at(wire.len() - 4);
    let dev_addr = u32::from_le_bytes(wire[1..5].try_into().unwrap());
    let fcnt = u16::from_le_bytes([wire[6], wire[7]]) as u32;
    crypto::data_mic::<C>(&keys.nwk_skey, true, dev_addr, fcnt, msg) == mic
}

/// Recovers the plaintext of a frame that decoded successfully.
pub fn decrypt_payload(frame: &Frame, keys: &SessionKeys) -> Vec<u8> {
    let mut data = frame.frm_payload.clone();
    let key = match frame.header.fport {
        Some(0) => &keys.nwk_skey,
        _ => &keys.app_skey,
    };
    crypto::apply_keystream::<Aes128>(key, true, frame.header.dev_addr.0, frame.header.fcnt as u32, &mut data);
    data
}

/// Join-request frame. The MIC key stands in for the AppKey; the join
/// procedure itself is not modelled.
pub fn encode_join_request(app_eui: u64, dev_eui: u64, dev_nonce: u16, key: &AesKey) -> WireFrame {
    let mut bytes = Vec::with_capacity(JOIN_REQUEST_LEN);
    bytes.push(Mhdr::new(MType::JoinRequest).0);
    bytes.extend_from_slice(&app_eui.to_le_bytes());
    bytes.extend_from_slice(&dev_eui.to_le_bytes());
    bytes.extend_from_slice(&dev_nonce.to_le_bytes());
    let tag = crypto::cmac::<Aes128>(key, &bytes);
    bytes.extend_from_slice(&tag[..4]);
    WireFrame::new(bytes)
}

pub fn verify_join_mic(wire: &[u8], key: &AesKey) -> bool {
    if wire.len() != JOIN_REQUEST_LEN {
        return false;
    }
    let (msg, mic) = wire.split_at(JOIN_REQUEST_LEN - 4);
    crypto::cmac::<Aes128>(key, msg)[..4] == *mic
}
