//! Network server: CRC gate, MIC check and frame-counter replay defence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::{self, AesKey, DevAddr, MType, Mhdr, SessionKeys};
use crate::medium::RxStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    RejectCrc,
    RejectMic,
    RejectReplay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Received {
    pub verdict: Verdict,
    /// Header fields as read from the frame; unknown when the CRC failed.
    pub dev_addr: Option<DevAddr>,
    pub fcnt: Option<u16>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerTally {
    pub accepted: u64,
    pub reject_crc: u64,
    pub reject_mic: u64,
    pub reject_replay: u64,
}

#[derive(Debug, Default)]
pub struct NetworkServer {
    sessions: BTreeMap<DevAddr, SessionKeys>,
    join_keys: BTreeMap<u64, AesKey>,
    last_fcnt: BTreeMap<DevAddr, u16>,
    last_nonce: BTreeMap<u64, u16>,
    tally: ServerTally,
}

impl NetworkServer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Provisions an ABP session. Join requests from `dev_addr` (as DevEUI)
    /// are checked against the same network key.
    pub fn register(&mut self, dev_addr: DevAddr, keys: SessionKeys) {
        self.join_keys.insert(dev_addr.0 as u64, keys.nwk_skey);
        self.sessions.insert(dev_addr, keys);
    }

    pub fn tally(&self) -> ServerTally {
        self.tally
    }

    pub fn last_fcnt(&self, dev_addr: DevAddr) -> Option<u16> {
        self.last_fcnt.get(&dev_addr).copied()
    }

    pub fn receive(&mut self, status: RxStatus, wire: &[u8]) -> Received {
        let r = self.judge(status, wire);
        let t = &mut self.tally;
        match r.verdict {
            Verdict::Accept => t.accepted += 1,
            Verdict::RejectCrc => t.reject_crc += 1,
            Verdict::RejectMic => t.reject_mic += 1,
            Verdict::RejectReplay => t.reject_replay += 1,
        }
        r
    }

    fn judge(&mut self, status: RxStatus, wire: &[u8]) -> Received {
        let reject = |verdict| Received { verdict, dev_addr: None, fcnt: None };
        if status != RxStatus::Delivered {
            return reject(Verdict::RejectCrc);
        }
        let Some(&mhdr) = wire.first() else { return reject(Verdict::RejectMic) };
        if Mhdr(mhdr).mtype() == MType::JoinRequest {
            return self.judge_join(wire);
        }
        let Ok(frame) = codec::decode(wire) else { return reject(Verdict::RejectMic) };
        let addr = frame.header.dev_addr;
        let fcnt = frame.header.fcnt;
        let seen = Received { verdict: Verdict::RejectMic, dev_addr: Some(addr), fcnt: Some(fcnt) };
        let Some(keys) = self.sessions.get(&addr) else { return seen };
        if !codec::verify_mic(wire, keys) {
            return seen;
        }
        if self.last_fcnt.get(&addr).is_some_and(|&last| fcnt <= last) {
            return Received { verdict: Verdict::RejectReplay, ..seen };
        }
        self.last_fcnt.insert(addr, fcnt);
        Received { verdict: Verdict::Accept, ..seen }
    }

    fn judge_join(&mut self, wire: &[u8]) -> Received {
        let mut r = Received { verdict: Verdict::RejectMic, dev_addr: None, fcnt: None };
        if wire.len() != codec::JOIN_REQUEST_LEN {
            return r;
        }
        let dev_eui = u64::from_le_bytes(wire[9..17].try_into().unwrap());
        let nonce = u16::from_le_bytes([wire[17], wire[18]]);
        r.dev_addr = u32::try_from(dev_eui).ok().map(DevAddr);
        r.fcnt = Some(nonce);
        let Some(key) = self.join_keys.get(&dev_eui) else { return r };
        if !codec::verify_join_mic(wire, key) {
            return r;
        }
        if self.last_nonce.get(&dev_eui).is_some_and(|&n| nonce <= n) {
            r.verdict = Verdict::RejectReplay;
            return r;
        }
        self.last_nonce.insert(dev_eui, nonce);
        r.verdict = Verdict::Accept;
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode, FrameHeader};

    const KEYS: SessionKeys = SessionKeys { nwk_skey: [9; 16], app_skey: [8; 16] };
    const ADDR: DevAddr = DevAddr(0x12345663);

    fn frame(fcnt: u16) -> Vec<u8> {
        encode(&FrameHeader::uplink(ADDR, fcnt, Some(1)), &KEYS, &[1, 2, 3, 4], 59).unwrap().bytes
    }

    fn server() -> NetworkServer {
        let mut s = NetworkServer::new();
        s.register(ADDR, KEYS);
        s
    }

    #[test]
    fn crc_failure_rejected_before_mic() {
        let mut s = server();
        assert_eq!(s.receive(RxStatus::CrcFailed, &frame(0)).verdict, Verdict::RejectCrc);
        assert_eq!(s.last_fcnt(ADDR), None);
    }

    #[test]
    fn counter_defends_against_replay() {
        let mut s = server();
        assert_eq!(s.receive(RxStatus::Delivered, &frame(3)).verdict, Verdict::Accept);
        assert_eq!(s.receive(RxStatus::Delivered, &frame(3)).verdict, Verdict::RejectReplay);
        assert_eq!(s.receive(RxStatus::Delivered, &frame(2)).verdict, Verdict::RejectReplay);
        assert_eq!(s.receive(RxStatus::Delivered, &frame(4)).verdict, Verdict::Accept);
        assert_eq!(s.tally(), ServerTally { accepted: 2, reject_crc: 0, reject_mic: 0, reject_replay: 2 });
    }

    #[test]
    fn bad_mic_and_unknown_device() {
        let mut s = server();
        let mut f = frame(0);
        f[10] ^= 1;
        assert_eq!(s.receive(RxStatus::Delivered, &f).verdict, Verdict::RejectMic);
        let other = encode(&FrameHeader::uplink(DevAddr(1), 0, None), &KEYS, &[], 59).unwrap();
        assert_eq!(s.receive(RxStatus::Delivered, &other.bytes).verdict, Verdict::RejectMic);
        assert_eq!(s.receive(RxStatus::Delivered, &[0x40, 1]).verdict, Verdict::RejectMic);
    }

    #[test]
    fn join_requests() {
        let mut s = server();
        let j = codec::encode_join_request(0, ADDR.0 as u64, 5, &KEYS.nwk_skey);
        assert_eq!(s.receive(RxStatus::Delivered, &j.bytes).verdict, Verdict::Accept);
        assert_eq!(s.receive(RxStatus::Delivered, &j.bytes).verdict, Verdict::RejectReplay);
        let bad = codec::encode_join_request(0, ADDR.0 as u64, 6, &[0; 16]);
        assert_eq!(s.receive(RxStatus::Delivered, &bad.bytes).verdict, Verdict::RejectMic);
    }
}
