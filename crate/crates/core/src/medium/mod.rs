//! The shared radio channel.
//!
//! [`Medium`] owns the event queue, the set of transmissions on air and the
//! receivers' lock state. It turns scheduled [`Transmission`]s into
//! start/end steps and resolves each locked frame through the capture model
//! when it ends. Actor timers ride on the same queue so that a single
//! `(time, rank, seq)` order governs the whole run.

pub mod capture;
pub mod queue;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::WireFrame;
use crate::num::Real;
use crate::phy::{self, Micros, PhyError, RadioParams};
pub use capture::{first_overlapping_byte, resolve, CaptureMatrix, LinkModel, ReceptionOutcome, RxStatus};
pub use queue::EventQueue;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediumError {
    #[error("event at {at} scheduled in the past (now {now})")]
    SchedulingInPast { at: Micros, now: Micros },
    #[error("no RSSI entry for link {from} -> {to}")]
    MissingLinkEntry { from: NodeId, to: NodeId },
    #[error("invalid capture matrix: {0}")]
    InvalidCapture(String),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    Data,
    Jam,
    Replay,
}

/// One signal on air.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub id: TxId,
    pub source: NodeId,
    pub channel_hz: u32,
    pub params: RadioParams,
    pub wire: WireFrame,
    pub start: Micros,
    pub end: Micros,
    pub tx_power_dbm: f64,
    pub kind: TxKind,
}

impl Transmission {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: TxId,
        source: NodeId,
        channel_hz: u32,
        params: RadioParams,
        wire: WireFrame,
        start: Micros,
        tx_power_dbm: f64,
        kind: TxKind,
    ) -> Result<Self, PhyError> {
        let end = start + phy::time_on_air(&params, wire.len())?;
        Ok(Self { id, source, channel_hz, params, wire, start, end, tx_power_dbm, kind })
    }

    pub fn airtime(&self) -> Micros {
        self.end - self.start
    }

    pub fn overlaps(&self, other: &Transmission) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Rank of same-instant events: ends free receivers before new starts lock them.
pub mod rank {
    pub const TX_END: u8 = 0;
    pub const TX_START: u8 = 1;
    pub const TIMER: u8 = 2;
}

enum Event<E> {
    TxStart(TxId),
    TxEnd(TxId),
    Timer(E),
}

struct Receiver {
    node: NodeId,
    channels: Vec<u32>,
    ignore: Vec<TxKind>,
    /// Frames locked per (channel, SF); several only when they started together.
    locks: BTreeMap<(u32, u8), Vec<(TxId, Micros)>>,
}

/// What the medium did when the clock advanced.
#[derive(Debug)]
pub enum Step<E> {
    Started {
        tx: Transmission,
        /// Receivers on the channel that were already locked onto another frame.
        not_heard: Vec<ReceptionOutcome>,
    },
    Ended {
        tx: Transmission,
        outcomes: Vec<ReceptionOutcome>,
    },
    Timer(E),
}

pub struct Medium<T, E> {
    queue: EventQueue<Event<E>>,
    links: LinkModel<T>,
    capture: CaptureMatrix<T>,
    txs: BTreeMap<TxId, Transmission>,
    history: BTreeMap<u32, Vec<TxId>>,
    active: BTreeMap<TxId, ()>,
    receivers: Vec<Receiver>,
    next_tx: u64,
}

impl<T: Real, E> Medium<T, E> {
    pub fn new(links: LinkModel<T>, capture: CaptureMatrix<T>) -> Self {
        Self {
            queue: EventQueue::new(),
            links,
            capture,
            txs: BTreeMap::new(),
            history: BTreeMap::new(),
            active: BTreeMap::new(),
            receivers: Vec::new(),
            next_tx: 0,
        }
    }

    pub fn now(&self) -> Micros {
        self.queue.now()
    }

    pub fn links(&self) -> &LinkModel<T> {
        &self.links
    }

    pub fn links_mut(&mut self) -> &mut LinkModel<T> {
        &mut self.links
    }

    pub fn capture(&self) -> &CaptureMatrix<T> {
        &self.capture
    }

    /// Registers a node that demodulates whole frames on `channels`,
    /// ignoring transmissions of the listed kinds.
    pub fn add_receiver(&mut self, node: NodeId, channels: Vec<u32>, ignore: Vec<TxKind>) {
        self.receivers.push(Receiver { node, channels, ignore, locks: BTreeMap::new() });
    }

    pub fn next_tx_id(&mut self) -> TxId {
        let id = TxId(self.next_tx);
        self.next_tx += 1;
        id
    }

    /// Puts a transmission on the schedule; `tx.id` must come from
    /// [`Medium::next_tx_id`].
    pub fn schedule(&mut self, tx: Transmission) -> Result<TxId, MediumError> {
        let id = tx.id;
        self.queue.schedule(tx.start, rank::TX_START, Event::TxStart(id))?;
        self.queue.schedule(tx.end, rank::TX_END, Event::TxEnd(id))?;
        self.txs.insert(id, tx);
        Ok(id)
    }

    pub fn schedule_timer(&mut self, at: Micros, event: E) -> Result<(), MediumError> {
        self.queue.schedule(at, rank::TIMER, Event::Timer(event))
    }

    /// Timer fired once the first `read_bytes` bytes of `tx` are readable,
    /// plus `delay`.
    pub fn schedule_read_milestone(&mut self, tx: &Transmission, read_bytes: usize, delay: Micros, event: E) -> Result<Micros, MediumError> {
        let read = read_bytes.min(tx.wire.len());
        let at = tx.start + phy::read_point(&tx.params, read)? + delay;
        self.schedule_timer(at, event)?;
        Ok(at)
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.queue.peek_time()
    }

    pub fn transmission(&self, id: TxId) -> Option<&Transmission> {
        self.txs.get(&id)
    }

    pub fn step(&mut self) -> Result<Option<Step<E>>, MediumError> {
        let Some((_, event)) = self.queue.pop() else {
            return Ok(None);
        };
        Ok(Some(match event {
            Event::Timer(e) => Step::Timer(e),
            Event::TxStart(id) => self.on_start(id)?,
            Event::TxEnd(id) => self.on_end(id)?,
        }))
    }

    fn on_start(&mut self, id: TxId) -> Result<Step<E>, MediumError> {
        let tx = self.txs[&id].clone();
        self.active.insert(id, ());
        self.history.entry(tx.channel_hz).or_default().push(id);
        let key = (tx.channel_hz, tx.params.spreading_factor());
        let mut not_heard = Vec::new();
        for rx in &mut self.receivers {
            if !rx.channels.contains(&tx.channel_hz) || rx.ignore.contains(&tx.kind) || rx.node == tx.source {
                continue;
            }
            if !self.links.contains(tx.source, rx.node) {
                return Err(MediumError::MissingLinkEntry { from: tx.source, to: rx.node });
            }
            let locked = rx.locks.entry(key).or_default();
            if locked.iter().all(|&(_, start)| start == tx.start) {
                locked.push((id, tx.start));
            } else {
                not_heard.push(ReceptionOutcome::not_heard(rx.node, id));
            }
        }
        Ok(Step::Started { tx, not_heard })
    }

    fn on_end(&mut self, id: TxId) -> Result<Step<E>, MediumError> {
        self.active.remove(&id);
        let tx = self.txs[&id].clone();
        let key = (tx.channel_hz, tx.params.spreading_factor());
        let others: Vec<&Transmission> = self
            .history
            .get(&tx.channel_hz)
            .into_iter()
            .flatten()
            .filter(|&&o| o != id)
            .map(|o| &self.txs[o])
            .filter(|o| o.overlaps(&tx))
            .collect();
        let mut outcomes = Vec::new();
        for rx in &mut self.receivers {
            let Some(locked) = rx.locks.get_mut(&key) else { continue };
            let Some(pos) = locked.iter().position(|&(l, _)| l == id) else { continue };
            locked.remove(pos);
            outcomes.push(resolve(&tx, &others, rx.node, &self.links, &self.capture)?);
        }
        self.prune(tx.channel_hz);
        Ok(Step::Ended { tx, outcomes })
    }

    fn prune(&mut self, channel: u32) {
        let now = self.queue.now();
        let Some(ids) = self.history.get_mut(&channel) else { return };
        let horizon = ids
            .iter()
            .filter(|id| self.active.contains_key(id))
            .map(|id| self.txs[id].start)
            .min()
            .unwrap_or(now);
        let txs = &mut self.txs;
        ids.retain(|id| {
            let keep = txs[id].end > horizon;
            if !keep {
                txs.remove(id);
            }
            keep
        });
    }
}
