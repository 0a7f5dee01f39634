use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::params::Duration;
use crate::{Error, Result};

/// Kind component of the tie key. Earlier variants win ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    RoundEnd,
    Message,
    Photon,
    Tick,
}

/// Order among events sharing a timestamp: `(node, slot, kind)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TieKey {
    pub node: usize,
    pub slot: usize,
    pub kind: EventKind,
}

impl TieKey {
    pub const fn new(node: usize, slot: usize, kind: EventKind) -> Self {
        TieKey { node, slot, kind }
    }
}

#[derive(Debug, Clone)]
pub struct Scheduled<T> {
    pub time: Duration,
    pub key: TieKey,
    pub sequence: u64,
    pub payload: T,
}

impl<T> Scheduled<T> {
    fn rank(&self) -> (Duration, TieKey, u64) {
        (self.time, self.key, self.sequence)
    }
}

impl<T> PartialEq for Scheduled<T> {
    fn eq(&self, other: &Self) -> bool {
        self.rank() == other.rank()
    }
}

impl<T> Eq for Scheduled<T> {}

impl<T> PartialOrd for Scheduled<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Scheduled<T> {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.rank().cmp(&self.rank())
    }
}

/// Min-priority queue ordered by `(time, tie key, insertion sequence)`.
///
/// Rejects events scheduled before the most recently popped timestamp, so a
/// handler can never cause an event in its own past.
#[derive(Debug)]
pub struct EventQueue<T> {
    heap: BinaryHeap<Scheduled<T>>,
    next_sequence: u64,
    now: Duration,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        EventQueue { heap: BinaryHeap::new(), next_sequence: 0, now: Duration::ZERO }
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Timestamp of the last popped event.
    pub fn now(&self) -> Duration {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn push(&mut self, time: Duration, key: TieKey, payload: T) -> Result<u64> {
        if time < self.now {
            return Err(Error::violation(format!("event scheduled at {time}, before current time {}", self.now)));
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Scheduled { time, key, sequence, payload });
        Ok(sequence)
    }

    pub fn pop(&mut self) -> Option<Scheduled<T>> {
        let ev = self.heap.pop()?;
        self.now = ev.time;
        Some(ev)
    }

    pub fn peek_time(&self) -> Option<Duration> {
        self.heap.peek().map(|e| e.time)
    }
}
