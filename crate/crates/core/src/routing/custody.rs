use bitvec::vec::BitVec;

use super::buffer::{Admission, Buffer, StoredCopy};
use super::policy::{split_tokens, RoutingPolicy, SelectView};
use crate::error::{Result, SimError};
use crate::metrics::{Collector, MetricsReport};
use crate::traffic::{Message, MessageId, NodeId};

/// Fate of a message so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Alive,
    Delivered(f64),
    Expired,
    /// Every copy was evicted before delivery or expiry.
    Extinct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageStatus {
    pub outcome: Outcome,
    pub live_copies: u32,
    /// Tokens destroyed together with evicted copies.
    pub lost_tokens: u32,
    /// Distinct nodes that ever held a copy.
    pub custodians: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    Delivered,
    /// A further copy reached an already-served destination.
    Duplicate,
    Relayed,
    Aborted,
}

/// Message custody across all nodes of one run.
#[derive(Debug, Clone)]
pub struct Custody {
    buffers: Vec<Buffer>,
    held: Vec<BitVec>,
    messages: Vec<Message>,
    status: Vec<MessageStatus>,
    outcomes: Vec<Outcome>,
    collector: Collector,
    /// Bumped whenever a node's buffer or held set changes.
    epochs: Vec<u64>,
}

impl Custody {
    pub fn new(nodes: usize, capacity: u64) -> Self {
        Custody {
            buffers: vec![Buffer::new(capacity); nodes],
            held: vec![BitVec::new(); nodes],
            messages: Vec::new(),
            status: Vec::new(),
            outcomes: Vec::new(),
            collector: Collector::default(),
            epochs: vec![0; nodes],
        }
    }

    /// Change counter of `node`'s buffer; equal values mean the buffer,
    /// its held set and its in-flight marks are unchanged.
    pub fn epoch(&self, node: NodeId) -> u64 {
        self.epochs[node]
    }

    pub fn buffer(&self, node: NodeId) -> &Buffer {
        &self.buffers[node]
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn message(&self, id: MessageId) -> Result<&Message> {
        self.messages
            .get(id.index())
            .ok_or(SimError::UnknownMessage(id.0))
    }

    pub fn status(&self, id: MessageId) -> &MessageStatus {
        &self.status[id.index()]
    }

    pub fn outcome(&self, id: MessageId) -> Outcome {
        self.outcomes[id.index()]
    }

    pub fn collector(&self) -> &Collector {
        &self.collector
    }

    pub fn has_held(&self, node: NodeId, id: MessageId) -> bool {
        self.held[node].get(id.index()).is_some_and(|b| *b)
    }

    fn set_held(&mut self, node: NodeId, id: MessageId) -> bool {
        let bits = &mut self.held[node];
        let i = id.index();
        if bits.len() <= i {
            bits.resize(i + 1, false);
        }
        !bits.replace(i, true)
    }

    fn set_outcome(&mut self, id: MessageId, outcome: Outcome) {
        self.status[id.index()].outcome = outcome;
        self.outcomes[id.index()] = outcome;
    }

    /// Registers a new message and stores it at its source.
    pub fn create(&mut self, message: Message, now: f64) -> Result<()> {
        if message.id.index() != self.messages.len() {
            return Err(SimError::UnknownMessage(message.id.0));
        }
        let (id, source, copies, size) = (message.id, message.source, message.copies, message.size);
        self.messages.push(message);
        self.status.push(MessageStatus {
            outcome: Outcome::Alive,
            live_copies: 0,
            lost_tokens: 0,
            custodians: 0,
        });
        self.outcomes.push(Outcome::Alive);
        self.collector.generated += 1;
        let copy = StoredCopy {
            id,
            size,
            tokens: copies,
            received_at: now,
            sending: 0,
        };
        if !self.store(source, copy, now) {
            self.status[id.index()].lost_tokens = copies;
            self.set_outcome(id, Outcome::Extinct);
            self.collector.extinct += 1;
        }
        Ok(())
    }

    /// Admits a copy at `node`, accounting for evictions. False if rejected.
    fn store(&mut self, node: NodeId, copy: StoredCopy, now: f64) -> bool {
        self.epochs[node] += 1;
        let id = copy.id;
        match self.buffers[node].admit(copy) {
            Admission::Rejected => false,
            Admission::Admitted { evicted } => {
                self.status[id.index()].live_copies += 1;
                if self.set_held(node, id) {
                    self.status[id.index()].custodians += 1;
                }
                for c in evicted {
                    self.collector.buffer_evicted += 1;
                    self.drop_copy(&c, now);
                    let st = &mut self.status[c.id.index()];
                    st.lost_tokens += c.tokens;
                    if st.live_copies == 0 && st.outcome == Outcome::Alive {
                        self.set_outcome(c.id, Outcome::Extinct);
                        self.collector.extinct += 1;
                    }
                }
                true
            }
        }
    }

    fn drop_copy(&mut self, c: &StoredCopy, now: f64) {
        self.collector.on_copy_removed(c.received_at, now);
        self.status[c.id.index()].live_copies -= 1;
    }

    /// Removes every copy older than its message's TTL.
    pub fn sweep_ttl(&mut self, now: f64) {
        for node in 0..self.buffers.len() {
            let messages = &self.messages;
            let removed = self.buffers[node].sweep(|id| messages[id.index()].is_expired(now));
            if !removed.is_empty() {
                self.epochs[node] += 1;
            }
            for c in removed {
                self.drop_copy(&c, now);
                if self.status[c.id.index()].outcome == Outcome::Alive {
                    self.set_outcome(c.id, Outcome::Expired);
                    self.collector.ttl_dropped += 1;
                }
            }
        }
    }

    /// Next message `from` should send to `to`, given messages already
    /// heading to `to`.
    pub fn select(
        &self,
        policy: &dyn RoutingPolicy,
        from: NodeId,
        to: NodeId,
        inbound: &[MessageId],
        now: f64,
    ) -> Option<MessageId> {
        let view = SelectView {
            sender: &self.buffers[from],
            receiver: &self.buffers[to],
            receiver_id: to,
            receiver_held: &self.held[to],
            inbound,
            messages: &self.messages,
            outcomes: &self.outcomes,
            now,
        };
        policy.select(&view)
    }

    pub fn begin_transfer(&mut self, from: NodeId, id: MessageId) {
        self.epochs[from] += 1;
        if let Some(c) = self.buffers[from].get_mut(id) {
            c.sending += 1;
        }
    }

    fn release(&mut self, from: NodeId, id: MessageId) -> bool {
        self.epochs[from] += 1;
        match self.buffers[from].get_mut(id) {
            Some(c) => {
                c.sending = c.sending.saturating_sub(1);
                true
            }
            None => false,
        }
    }

    pub fn abort_transfer(&mut self, from: NodeId, id: MessageId) {
        self.release(from, id);
        self.collector.aborted += 1;
    }

    /// Applies a finished transfer of `id` from `from` to `to` at `now`.
    pub fn complete_transfer(
        &mut self,
        policy: &dyn RoutingPolicy,
        from: NodeId,
        to: NodeId,
        id: MessageId,
        now: f64,
    ) -> Completion {
        let abort = |s: &mut Self| {
            s.collector.aborted += 1;
            Completion::Aborted
        };
        if !self.release(from, id) {
            return abort(self);
        }
        let msg = &self.messages[id.index()];
        if msg.is_expired(now) {
            return abort(self);
        }
        let created_at = msg.created_at;
        if msg.destination == to {
            self.collector.relayed += 1;
            let first = !matches!(self.outcomes[id.index()], Outcome::Delivered(_));
            if first {
                self.set_outcome(id, Outcome::Delivered(now));
                self.collector.on_delivered(created_at, now);
            }
            let c = self.buffers[from].remove(id).expect("released copy exists");
            self.drop_copy(&c, now);
            return if first {
                Completion::Delivered
            } else {
                Completion::Duplicate
            };
        }
        if self.buffers[to].contains(id) {
            return abort(self);
        }
        let tokens = self.buffers[from].get(id).expect("released copy exists").tokens;
        let (keep, give) = if policy.splits_copies() {
            if tokens < 2 || self.has_held(to, id) {
                return abort(self);
            }
            split_tokens(tokens)
        } else {
            (tokens, tokens)
        };
        let copy = StoredCopy {
            id,
            size: self.messages[id.index()].size,
            tokens: give,
            received_at: now,
            sending: 0,
        };
        if !self.store(to, copy, now) {
            return abort(self);
        }
        if let Some(c) = self.buffers[from].get_mut(id) {
            c.tokens = keep;
        }
        self.collector.relayed += 1;
        Completion::Relayed
    }

    /// Checks copy-token conservation for live messages.
    pub fn check_tokens(&self, now: f64) -> Result<()> {
        let mut sums = vec![0u64; self.messages.len()];
        for b in &self.buffers {
            for c in b.iter() {
                sums[c.id.index()] += c.tokens as u64;
            }
        }
        for (i, m) in self.messages.iter().enumerate() {
            let st = &self.status[i];
            if st.outcome != Outcome::Alive || m.is_expired(now) {
                continue;
            }
            let total = sums[i] + st.lost_tokens as u64;
            if total != m.copies as u64 {
                return Err(SimError::Invariant(format!(
                    "message {} holds {} tokens plus {} lost, expected {}",
                    m.id, sums[i], st.lost_tokens, m.copies
                )));
            }
            if st.custodians > m.copies {
                return Err(SimError::Invariant(format!(
                    "message {} has {} custodians with {} copies",
                    m.id, st.custodians, m.copies
                )));
            }
        }
        Ok(())
    }

    /// Closes the run at `end`: expires overdue copies and censors residency.
    pub fn finish(&mut self, end: f64, seed: u64, router: &str) -> MetricsReport {
        self.sweep_ttl(end);
        for b in &self.buffers {
            for c in b.iter() {
                self.collector.on_copy_removed(c.received_at, end);
            }
        }
        self.collector.still_buffered = self
            .outcomes
            .iter()
            .filter(|o| **o == Outcome::Alive)
            .count() as u64;
        self.collector.finish(seed, router)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::RouterKind;

    const MB: u64 = 1_000_000;

    fn msg(id: u32, src: NodeId, dst: NodeId, size: u64, copies: u32) -> Message {
        Message {
            id: MessageId(id),
            source: src,
            destination: dst,
            size,
            created_at: 0.0,
            ttl: 86_400.0,
            copies,
        }
    }

    #[test]
    fn spray_splits_tokens_and_conserves() {
        let p = RouterKind::SprayAndWait.policy(0.5);
        let mut c = Custody::new(4, 100 * MB);
        c.create(msg(0, 0, 3, MB, 10), 0.0).unwrap();
        let id = MessageId(0);
        assert_eq!(c.select(p.as_ref(), 0, 1, &[], 1.0), Some(id));
        c.begin_transfer(0, id);
        assert_eq!(c.complete_transfer(p.as_ref(), 0, 1, id, 1.0), Completion::Relayed);
        assert_eq!(c.buffer(0).get(id).unwrap().tokens, 5);
        assert_eq!(c.buffer(1).get(id).unwrap().tokens, 5);
        c.check_tokens(1.0).unwrap();
        // The first custodian never receives the message again.
        assert_eq!(c.select(p.as_ref(), 1, 0, &[], 2.0), None);
        assert_eq!(c.status(id).custodians, 2);
    }

    #[test]
    fn odd_split_floor_to_recipient() {
        let p = RouterKind::Hrson.policy(0.5);
        let mut c = Custody::new(3, 100 * MB);
        c.create(msg(0, 0, 2, MB, 3), 0.0).unwrap();
        let id = MessageId(0);
        c.begin_transfer(0, id);
        c.complete_transfer(p.as_ref(), 0, 1, id, 1.0);
        assert_eq!(c.buffer(0).get(id).unwrap().tokens, 2);
        assert_eq!(c.buffer(1).get(id).unwrap().tokens, 1);
        c.check_tokens(1.0).unwrap();
    }

    #[test]
    fn delivery_latency_and_duplicates() {
        let p = RouterKind::Epidemic.policy(0.5);
        let mut c = Custody::new(3, 100 * MB);
        let mut m = msg(0, 0, 2, MB, 1);
        m.created_at = 100.0;
        c.create(m, 100.0).unwrap();
        let id = MessageId(0);
        c.begin_transfer(0, id);
        assert_eq!(c.complete_transfer(p.as_ref(), 0, 1, id, 120.0), Completion::Relayed);
        c.begin_transfer(0, id);
        assert_eq!(c.complete_transfer(p.as_ref(), 0, 2, id, 250.0), Completion::Delivered);
        assert_eq!(c.outcome(id), Outcome::Delivered(250.0));
        assert!(!c.buffer(0).contains(id));
        c.begin_transfer(1, id);
        assert_eq!(c.complete_transfer(p.as_ref(), 1, 2, id, 300.0), Completion::Duplicate);
        let r = c.finish(400.0, 1, "epidemic");
        assert_eq!(r.delivered, 1);
        assert_eq!(r.avg_latency, Some(150.0));
        assert_eq!(r.relayed, 3);
        assert!(r.is_conserved());
    }

    #[test]
    fn unknown_id_is_an_error() {
        let c = Custody::new(2, MB);
        assert_eq!(c.message(MessageId(7)), Err(SimError::UnknownMessage(7)));
    }

    #[test]
    fn eviction_to_extinction_is_counted() {
        let p = RouterKind::Epidemic.policy(0.5);
        let mut c = Custody::new(3, 2 * MB);
        c.create(msg(0, 0, 2, MB, 1), 0.0).unwrap();
        c.create(msg(1, 0, 2, MB, 1), 1.0).unwrap();
        c.create(msg(2, 0, 2, MB, 1), 2.0).unwrap();
        assert_eq!(c.outcome(MessageId(0)), Outcome::Extinct);
        let big = msg(3, 1, 2, 3 * MB, 1);
        c.create(big, 3.0).unwrap();
        assert_eq!(c.outcome(MessageId(3)), Outcome::Extinct);
        let r = c.finish(10.0, 0, p.name());
        assert_eq!(r.extinct, 2);
        assert_eq!(r.still_buffered, 2);
        assert_eq!(r.buffer_evicted, 1);
        assert!(r.is_conserved());
    }

    #[test]
    fn ttl_sweep_boundary() {
        let mut c = Custody::new(2, 100 * MB);
        c.create(msg(0, 0, 1, MB, 1), 0.0).unwrap();
        c.sweep_ttl(86_400.0);
        assert!(c.buffer(0).contains(MessageId(0)));
        c.sweep_ttl(86_401.0);
        assert!(!c.buffer(0).contains(MessageId(0)));
        let r = c.finish(90_000.0, 0, "snw");
        assert_eq!(r.ttl_dropped, 1);
        assert_eq!(r.avg_buffer_time, Some(86_401.0));
        assert!(r.is_conserved());
    }

    #[test]
    fn lone_token_is_not_sprayed() {
        let p = RouterKind::SprayAndWait.policy(0.5);
        let mut c = Custody::new(3, 100 * MB);
        c.create(msg(0, 0, 2, MB, 1), 0.0).unwrap();
        assert_eq!(c.select(p.as_ref(), 0, 1, &[], 1.0), None);
        assert_eq!(c.select(p.as_ref(), 0, 2, &[], 1.0), Some(MessageId(0)));
    }
}
