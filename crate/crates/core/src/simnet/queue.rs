use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::ids::Tick;

/// Min-heap of events keyed by `(tick, seq)`. Sequence numbers come from a
/// counter shared with the event log, so they are unique per run.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Queued<E>>>,
}

#[derive(Debug)]
struct Queued<E> {
    tick: Tick,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Queued<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.tick, self.seq) == (other.tick, other.seq)
    }
}

impl<E> Eq for Queued<E> {}

impl<E> PartialOrd for Queued<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Queued<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.tick, self.seq).cmp(&(other.tick, other.seq))
    }
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue { heap: BinaryHeap::new() }
    }
}

impl<E> EventQueue<E> {
    pub fn push(&mut self, tick: Tick, seq: u64, event: E) {
        self.heap.push(Reverse(Queued { tick, seq, event }));
    }

    pub fn peek_tick(&self) -> Option<Tick> {
        self.heap.peek().map(|Reverse(q)| q.tick)
    }

    /// Next event due at or before `tick`.
    pub fn pop_due(&mut self, tick: Tick) -> Option<(Tick, u64, E)> {
        if self.peek_tick()? > tick {
            return None;
        }
        self.heap.pop().map(|Reverse(q)| (q.tick, q.seq, q.event))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
