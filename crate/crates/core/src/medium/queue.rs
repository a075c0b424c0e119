//! Deterministic future-event list.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::MediumError;
use crate::phy::Micros;

struct Entry<E> {
    time: Micros,
    rank: u8,
    seq: u64,
    event: E,
}

impl<E> Entry<E> {
    fn key(&self) -> (Micros, u8, u64) {
        (self.time, self.rank, self.seq)
    }
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; reverse to pop the smallest key first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

/// Min-priority queue ordered by `(time, rank, insertion sequence)`.
///
/// `rank` orders event classes that fall on the same instant; the sequence
/// number makes the pop order a pure function of the push order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    now: Micros,
    seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self { heap: BinaryHeap::new(), now: Micros::ZERO, seq: 0 }
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, time: Micros, rank: u8, event: E) -> Result<(), MediumError> {
        if time < self.now {
            return Err(MediumError::SchedulingInPast { at: time, now: self.now });
        }
        self.heap.push(Entry { time, rank, seq: self.seq, event });
        self.seq += 1;
        Ok(())
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn pop(&mut self) -> Option<(Micros, E)> {
        let e = self.heap.pop()?;
        self.now = e.time;
        Some((e.time, e.event))
    }
}
