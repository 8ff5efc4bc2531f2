use super::custody::{Custody, Outcome};
use super::exchange::Exchange;
use super::policy::RoutingPolicy;
use crate::error::{Result, SimError};
use crate::metrics::MetricsReport;
use crate::traffic::{Message, NodeId};

/// A scripted link between `a` (hub) and `b` over `[start, end)` at `rate`
/// bytes per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub a: NodeId,
    pub b: NodeId,
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

impl Contact {
    pub fn capacity(&self) -> f64 {
        (self.end - self.start).max(0.0) * self.rate
    }

    fn active_at(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone)]
pub struct ReplayResult {
    pub outcomes: Vec<Outcome>,
    pub report: MetricsReport,
}

/// Replays a contact schedule through the regular transfer machinery,
/// stepping in ticks of `dt`. Messages are created at their `created_at`.
pub fn replay_contacts(
    nodes: usize,
    contacts: &[Contact],
    mut messages: Vec<Message>,
    policy: &dyn RoutingPolicy,
    buffer_capacity: u64,
    dt: f64,
) -> Result<ReplayResult> {
    for c in contacts {
        if c.a >= nodes || c.b >= nodes || c.a == c.b {
            return Err(SimError::config("contacts", format!("bad endpoints {}-{}", c.a, c.b)));
        }
    }
    messages.sort_by(|x, y| x.created_at.total_cmp(&y.created_at).then(x.id.cmp(&y.id)));
    let end = contacts
        .iter()
        .map(|c| c.end)
        .chain(messages.iter().map(|m| m.created_at + dt))
        .fold(0.0, f64::max);
    let mut custody = Custody::new(nodes, buffer_capacity);
    let mut exchange = Exchange::new();
    let mut pending = messages.into_iter().peekable();
    let mut tick = 0u64;
    loop {
        let now = tick as f64 * dt;
        if now > end {
            break;
        }
        while pending.peek().is_some_and(|m| m.created_at <= now) {
            custody.create(pending.next().expect("peeked"), now)?;
        }
        let active: Vec<&Contact> = contacts.iter().filter(|c| c.active_at(now)).collect();
        let mut busy = vec![false; nodes];
        for c in &active {
            if busy[c.a] || busy[c.b] {
                return Err(SimError::config(
                    "contacts",
                    format!("node in two concurrent contacts at {now}"),
                ));
            }
            busy[c.a] = true;
            busy[c.b] = true;
        }
        exchange.sync(active.iter().map(|c| (c.a, c.b)), &mut custody, now);
        let rate = |hub: NodeId| {
            active
                .iter()
                .find(|c| c.a == hub)
                .map_or(0.0, |c| c.rate)
        };
        exchange.progress(now, dt, &rate, &mut custody, policy);
        custody.sweep_ttl(now + dt);
        tick += 1;
    }
    let finish = tick as f64 * dt;
    exchange.sync(std::iter::empty(), &mut custody, finish);
    let outcomes = (0..custody.messages().len())
        .map(|i| custody.outcome(crate::traffic::MessageId(i as u32)))
        .collect();
    let report = custody.finish(finish, 0, policy.name());
    Ok(ReplayResult { outcomes, report })
}
