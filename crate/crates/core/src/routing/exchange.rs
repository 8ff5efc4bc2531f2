use std::collections::BTreeMap;

use super::custody::{Completion, Custody};
use super::policy::RoutingPolicy;
use crate::traffic::{MessageId, NodeId};

/// Remaining bytes below which a transfer counts as finished.
const BYTE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferOutcome {
    Completed,
    Aborted,
}

/// One attempted message transfer over a link.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRecord {
    pub message: MessageId,
    pub from: NodeId,
    pub to: NodeId,
    pub started_at: f64,
    pub ended_at: f64,
    pub bytes_moved: f64,
    pub outcome: TransferOutcome,
}

#[derive(Debug, Clone)]
struct Transfer {
    message: MessageId,
    from: NodeId,
    to: NodeId,
    size: f64,
    remaining: f64,
    started_at: f64,
}

#[derive(Debug, Clone, Default)]
struct Link {
    transfer: Option<Transfer>,
    /// Which side offers first when the link is idle.
    spoke_first: bool,
    /// Buffer epochs `(hub, spoke)` at which neither side had anything to send.
    idle_at: Option<(u64, u64)>,
}

/// Data movement over hub-and-spoke links (AP and its clients).
///
/// Each link carries at most one transfer at a time; a hub's bandwidth is
/// split equally among its active transfers and re-divided whenever one
/// finishes inside a tick.
#[derive(Debug, Clone, Default)]
pub struct Exchange {
    links: BTreeMap<(NodeId, NodeId), Link>,
    log: Option<Vec<TransferRecord>>,
}

impl Exchange {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps a record of every finished or aborted transfer.
    pub fn with_log() -> Self {
        Exchange {
            links: BTreeMap::new(),
            log: Some(Vec::new()),
        }
    }

    pub fn log(&self) -> &[TransferRecord] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn active_transfers(&self) -> usize {
        self.links.values().filter(|l| l.transfer.is_some()).count()
    }

    fn record(&mut self, t: &Transfer, now: f64, outcome: TransferOutcome) {
        if let Some(log) = &mut self.log {
            log.push(TransferRecord {
                message: t.message,
                from: t.from,
                to: t.to,
                started_at: t.started_at,
                ended_at: now,
                bytes_moved: match outcome {
                    TransferOutcome::Completed => t.size,
                    TransferOutcome::Aborted => t.size - t.remaining,
                },
                outcome,
            });
        }
    }

    /// Replaces the link set with `(hub, spoke)` pairs; transfers on links
    /// that vanished are discarded.
    pub fn sync(&mut self, current: impl IntoIterator<Item = (NodeId, NodeId)>, custody: &mut Custody, now: f64) {
        let mut next: BTreeMap<(NodeId, NodeId), Link> = BTreeMap::new();
        for key in current {
            let link = self.links.remove(&key).unwrap_or_default();
            next.insert(key, link);
        }
        let lost = std::mem::replace(&mut self.links, next);
        for ((hub, _), link) in lost {
            if let Some(t) = link.transfer {
                custody.abort_transfer(t.from, t.message);
                self.record(&t, now, TransferOutcome::Aborted);
                self.forget_idle(hub);
            }
        }
    }

    /// Moves data over `[now, now + dt)`. `share(hub)` is the bandwidth the
    /// hub divides among its transfers.
    pub fn progress(
        &mut self,
        now: f64,
        dt: f64,
        share: &dyn Fn(NodeId) -> f64,
        custody: &mut Custody,
        policy: &dyn RoutingPolicy,
    ) {
        let keys: Vec<(NodeId, NodeId)> = self.links.keys().copied().collect();
        let mut start = 0;
        while start < keys.len() {
            let hub = keys[start].0;
            let end = keys[start..]
                .iter()
                .position(|k| k.0 != hub)
                .map_or(keys.len(), |p| start + p);
            self.progress_hub(&keys[start..end], now, now + dt, share(hub), custody, policy);
            start = end;
        }
    }

    /// Drops idle marks on `hub`'s links; their inbound sets changed.
    fn forget_idle(&mut self, hub: NodeId) {
        for (_, link) in self.links.range_mut((hub, 0)..=(hub, NodeId::MAX)) {
            link.idle_at = None;
        }
    }

    fn try_start(&mut self, key: (NodeId, NodeId), t: f64, custody: &mut Custody, policy: &dyn RoutingPolicy, group: &[(NodeId, NodeId)]) {
        let (hub, spoke) = key;
        let epochs = (custody.epoch(hub), custody.epoch(spoke));
        let link = &self.links[&key];
        if link.idle_at == Some(epochs) {
            return;
        }
        let order = if link.spoke_first {
            [(spoke, hub), (hub, spoke)]
        } else {
            [(hub, spoke), (spoke, hub)]
        };
        for (from, to) in order {
            let inbound: Vec<MessageId> = group
                .iter()
                .filter_map(|k| self.links[k].transfer.as_ref())
                .filter(|tr| tr.to == to)
                .map(|tr| tr.message)
                .collect();
            if let Some(id) = custody.select(policy, from, to, &inbound, t) {
                let size = custody.messages()[id.index()].size as f64;
                custody.begin_transfer(from, id);
                self.links.get_mut(&key).expect("link").transfer = Some(Transfer {
                    message: id,
                    from,
                    to,
                    size,
                    remaining: size,
                    started_at: t,
                });
                return;
            }
        }
        self.links.get_mut(&key).expect("link").idle_at = Some(epochs);
    }

    fn progress_hub(
        &mut self,
        group: &[(NodeId, NodeId)],
        from: f64,
        until: f64,
        share: f64,
        custody: &mut Custody,
        policy: &dyn RoutingPolicy,
    ) {
        let mut t = from;
        while t < until {
            for &key in group {
                if self.links[&key].transfer.is_none() {
                    self.try_start(key, t, custody, policy, group);
                }
            }
            let active: Vec<(NodeId, NodeId)> = group
                .iter()
                .copied()
                .filter(|k| self.links[k].transfer.is_some())
                .collect();
            if active.is_empty() || share <= 0.0 {
                return;
            }
            let rate = share / active.len() as f64;
            let min_rem = active
                .iter()
                .map(|k| self.links[k].transfer.as_ref().expect("active").remaining)
                .fold(f64::INFINITY, f64::min);
            let step = (min_rem / rate).min(until - t);
            t = if step >= until - t { until } else { t + step };
            let mut finished = false;
            for k in &active {
                let link = self.links.get_mut(k).expect("link");
                let tr = link.transfer.as_mut().expect("active");
                tr.remaining -= rate * step;
                if tr.remaining <= BYTE_EPSILON {
                    let tr = link.transfer.take().expect("active");
                    link.spoke_first = !link.spoke_first;
                    let outcome = match custody.complete_transfer(policy, tr.from, tr.to, tr.message, t) {
                        Completion::Aborted => TransferOutcome::Aborted,
                        _ => TransferOutcome::Completed,
                    };
                    self.record(&tr, t, outcome);
                    finished = true;
                }
            }
            if finished {
                self.forget_idle(group[0].0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::RouterKind;
    use crate::traffic::Message;

    fn msg(id: u32, src: NodeId, dst: NodeId, size: u64) -> Message {
        Message {
            id: MessageId(id),
            source: src,
            destination: dst,
            size,
            created_at: 0.0,
            ttl: 1e9,
            copies: 10,
        }
    }

    #[test]
    fn single_transfer_finishes_mid_tick() {
        let p = RouterKind::Epidemic.policy(0.5);
        let mut c = Custody::new(2, 1 << 30);
        c.create(msg(0, 0, 1, 1_000_000), 0.0).unwrap();
        let mut x = Exchange::with_log();
        x.sync([(0, 1)], &mut c, 16.0);
        x.progress(16.0, 1.0, &|_| 5e6, &mut c, p.as_ref());
        let rec = &x.log()[0];
        assert!((rec.ended_at - 16.2).abs() < 1e-9);
        assert_eq!(rec.outcome, TransferOutcome::Completed);
        assert_eq!(rec.bytes_moved, 1e6);
        assert_eq!(c.outcome(MessageId(0)), crate::routing::Outcome::Delivered(rec.ended_at));
    }

    #[test]
    fn hub_bandwidth_is_shared_and_reallocated() {
        // Two clients each receive 1 MB from the AP; then one more 1 MB.
        let p = RouterKind::Epidemic.policy(0.5);
        let mut c = Custody::new(3, 1 << 30);
        c.create(msg(0, 0, 1, 1_000_000), 0.0).unwrap();
        c.create(msg(1, 0, 2, 1_000_000), 0.0).unwrap();
        c.create(msg(2, 0, 2, 500_000), 0.0).unwrap();
        let mut x = Exchange::with_log();
        x.sync([(0, 1), (0, 2)], &mut c, 0.0);
        x.progress(0.0, 1.0, &|_| 5e6, &mut c, p.as_ref());
        // Both 1 MB deliveries share 5 MB/s and end at 0.4 s. The 0.5 MB
        // message then goes to both clients at 2.5 MB/s each (0.6 s); the AP
        // dropped its copy on delivery, so client 1 hands it back alone at
        // full speed (0.7 s).
        let ends: Vec<(u32, NodeId, NodeId, f64)> = x
            .log()
            .iter()
            .map(|r| (r.message.0, r.from, r.to, r.ended_at))
            .collect();
        let expected = [(0, 0, 1, 0.4), (1, 0, 2, 0.4), (2, 0, 1, 0.6), (2, 0, 2, 0.6), (2, 1, 0, 0.7)];
        assert_eq!(ends.len(), expected.len());
        for (got, want) in ends.iter().zip(expected) {
            assert_eq!((got.0, got.1, got.2), (want.0, want.1, want.2));
            assert!((got.3 - want.3).abs() < 1e-9, "{got:?}");
        }
        let moved: f64 = x.log().iter().map(|r| r.bytes_moved).sum();
        assert!(moved <= 5e6 + 1e-6);
    }

    #[test]
    fn lost_link_aborts_partial_transfer() {
        let p = RouterKind::SprayAndWait.policy(0.5);
        let mut c = Custody::new(3, 1 << 30);
        c.create(msg(0, 0, 2, 10_000_000), 0.0).unwrap();
        let mut x = Exchange::with_log();
        x.sync([(0, 1)], &mut c, 0.0);
        x.progress(0.0, 1.0, &|_| 5e6, &mut c, p.as_ref());
        assert_eq!(x.active_transfers(), 1);
        x.sync(std::iter::empty(), &mut c, 1.0);
        let rec = &x.log()[0];
        assert_eq!(rec.outcome, TransferOutcome::Aborted);
        assert!((rec.bytes_moved - 5e6).abs() < 1e-6);
        assert_eq!(c.buffer(0).get(MessageId(0)).unwrap().tokens, 10);
        assert!(!c.buffer(1).contains(MessageId(0)));
        assert_eq!(c.collector().aborted, 1);
    }
}
