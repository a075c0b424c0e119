//! Line-delimited JSON event log with a running SHA-256 digest.

use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actors::Verdict;
use crate::codec::DevAddr;
use crate::medium::{RxStatus, TxKind};
use crate::phy::Micros;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Record {
    TxStart {
        t: Micros,
        tx: u64,
        node: u32,
        kind: TxKind,
        channel: u32,
        sf: u8,
        len: usize,
        end: Micros,
    },
    Rx {
        t: Micros,
        tx: u64,
        receiver: u32,
        status: RxStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        corrupted_from_byte: Option<usize>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        jammed: bool,
    },
    /// Network-server verdict on a frame heard by at least one gateway.
    Server {
        t: Micros,
        tx: u64,
        kind: TxKind,
        verdict: Verdict,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dev_addr: Option<DevAddr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fcnt: Option<u16>,
        channel: u32,
        sf: u8,
        len: usize,
    },
    Decision {
        t: Micros,
        node: u32,
        tx: u64,
        matched: bool,
    },
    Deferral {
        t: Micros,
        node: u32,
        until: Micros,
    },
}

impl Record {
    pub fn time(&self) -> Micros {
        match self {
            Record::TxStart { t, .. }
            | Record::Rx { t, .. }
            | Record::Server { t, .. }
            | Record::Decision { t, .. }
            | Record::Deferral { t, .. } => *t,
        }
    }
}

/// Accumulates records; keeps the text only when asked to.
pub struct EventLog {
    hasher: Sha256,
    lines: Option<Vec<String>>,
    count: u64,
}

impl EventLog {
    pub fn new(keep: bool) -> Self {
        Self { hasher: Sha256::new(), lines: keep.then(Vec::new), count: 0 }
    }

    pub fn push(&mut self, r: &Record) {
        let line = serde_json::to_string(r).expect("records always serialise");
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        self.count += 1;
        if let Some(lines) = &mut self.lines {
            lines.push(line);
        }
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }

    pub fn lines(&self) -> &[String] {
        self.lines.as_deref().unwrap_or(&[])
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        for l in self.lines() {
            s.push_str(l);
            s.push('\n');
        }
        s
    }
}

/// Reads a log written by [`EventLog::text`]; blank lines are skipped.
pub fn read_records<R: BufRead>(input: R) -> io::Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(r);
    }
    Ok(out)
}
