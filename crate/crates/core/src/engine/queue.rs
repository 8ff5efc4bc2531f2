use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::traffic::Message;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Draw and create the next random message.
    Traffic,
    /// Create a predetermined message.
    Inject(Message),
}

#[derive(Debug, Clone)]
struct Entry {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap yields the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Events ordered by time, then by insertion.
#[derive(Debug, Clone, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, kind: EventKind) {
        self.heap.push(Entry {
            time,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    /// Removes the earliest event if it is due at or before `now`.
    pub fn pop_due(&mut self, now: f64) -> Option<(f64, EventKind)> {
        if self.heap.peek()?.time <= now {
            self.heap.pop().map(|e| (e.time, e.kind))
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn dequeues_in_time_then_insertion_order(times in prop::collection::vec(0u8..20, 0..60)) {
            let mut q = EventQueue::new();
            for (i, &t) in times.iter().enumerate() {
                q.push(t as f64, EventKind::Inject(crate::traffic::Message {
                    id: crate::traffic::MessageId(i as u32),
                    source: 0,
                    destination: 1,
                    size: 1,
                    created_at: t as f64,
                    ttl: 1.0,
                    copies: 1,
                }));
            }
            let mut out = Vec::new();
            while let Some((t, EventKind::Inject(m))) = q.pop_due(f64::INFINITY) {
                out.push((t, m.id.0));
            }
            let mut expected: Vec<(f64, u32)> =
                times.iter().enumerate().map(|(i, &t)| (t as f64, i as u32)).collect();
            expected.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            prop_assert_eq!(out, expected);
        }
    }

    #[test]
    fn future_events_wait() {
        let mut q = EventQueue::new();
        q.push(5.0, EventKind::Traffic);
        assert_eq!(q.pop_due(4.9), None);
        assert_eq!(q.pop_due(5.0), Some((5.0, EventKind::Traffic)));
        assert!(q.is_empty());
    }
}
