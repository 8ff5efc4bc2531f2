use std::fmt;
use std::str::FromStr;

use bitvec::slice::BitSlice;
use serde::{Deserialize, Serialize};

use super::buffer::Buffer;
use super::custody::Outcome;
use crate::error::SimError;
use crate::traffic::{Message, MessageId, NodeId};

/// What a sender knows about a peer when picking the next message to send.
#[derive(Debug, Clone, Copy)]
pub struct SelectView<'a> {
    pub sender: &'a Buffer,
    pub receiver: &'a Buffer,
    pub receiver_id: NodeId,
    /// Messages the receiver has ever held.
    pub receiver_held: &'a BitSlice,
    /// Messages already on their way to the receiver.
    pub inbound: &'a [MessageId],
    pub messages: &'a [Message],
    pub outcomes: &'a [Outcome],
    pub now: f64,
}

impl SelectView<'_> {
    fn message(&self, id: MessageId) -> &Message {
        &self.messages[id.index()]
    }

    fn ever_held(&self, id: MessageId) -> bool {
        self.receiver_held.get(id.index()).is_some_and(|b| *b)
    }

    fn offerable(&self, id: MessageId) -> bool {
        !self.message(id).is_expired(self.now)
            && !self.receiver.contains(id)
            && !self.inbound.contains(&id)
    }

    fn is_direct(&self, id: MessageId) -> bool {
        let m = self.message(id);
        m.destination == self.receiver_id && !matches!(self.outcomes[id.index()], Outcome::Delivered(_))
    }

    /// Destination-bound first, then by creation time and id.
    fn priority(&self, a: MessageId, b: MessageId) -> std::cmp::Ordering {
        let (ma, mb) = (self.message(a), self.message(b));
        (ma.destination != self.receiver_id)
            .cmp(&(mb.destination != self.receiver_id))
            .then(ma.created_at.total_cmp(&mb.created_at))
            .then(a.cmp(&b))
    }

    fn ordered(&self, mut ids: Vec<MessageId>) -> Vec<MessageId> {
        ids.sort_by(|&a, &b| self.priority(a, b));
        ids
    }

    fn first(&self, ids: impl Iterator<Item = MessageId>) -> Option<MessageId> {
        ids.min_by(|&a, &b| self.priority(a, b))
    }

    fn epidemic_candidates(&self) -> impl Iterator<Item = MessageId> + '_ {
        self.sender
            .iter()
            .map(|c| c.id)
            .filter(|&id| self.offerable(id))
            .filter(|&id| self.message(id).destination != self.receiver_id || self.is_direct(id))
    }

    fn snw_candidates(&self) -> impl Iterator<Item = MessageId> + '_ {
        self.sender
            .iter()
            .filter(|c| self.offerable(c.id))
            .filter(|c| {
                if self.message(c.id).destination == self.receiver_id {
                    self.is_direct(c.id)
                } else {
                    c.tokens >= 2 && c.sending == 0 && !self.ever_held(c.id)
                }
            })
            .map(|c| c.id)
    }
}

/// Every message the peer lacks, best first.
pub fn epidemic_select(view: &SelectView<'_>) -> Vec<MessageId> {
    view.ordered(view.epidemic_candidates().collect())
}

/// Direct deliveries, plus spraying of copies holding at least two tokens
/// to peers that never held the message; best first.
pub fn snw_select(view: &SelectView<'_>) -> Vec<MessageId> {
    view.ordered(view.snw_candidates().collect())
}

/// Copies the recipient receives when `tokens` are split on a spray.
pub fn split_tokens(tokens: u32) -> (u32, u32) {
    let give = tokens / 2;
    (tokens - give, give)
}

/// Forwarding and access-point eligibility rules of one router.
pub trait RoutingPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    /// Probability that a node whose scan found no AP takes the AP role.
    fn ap_probability(&self, node: NodeId, at_home: bool) -> f64;
    /// Whether a relay halves copy tokens instead of duplicating the message.
    fn splits_copies(&self) -> bool;
    fn select(&self, view: &SelectView<'_>) -> Option<MessageId>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouterKind {
    Epidemic,
    #[serde(rename = "snw", alias = "sprayandwait")]
    SprayAndWait,
    Hrson,
}

impl RouterKind {
    pub const ALL: [RouterKind; 3] = [RouterKind::Epidemic, RouterKind::SprayAndWait, RouterKind::Hrson];

    pub fn name(self) -> &'static str {
        match self {
            RouterKind::Epidemic => "epidemic",
            RouterKind::SprayAndWait => "snw",
            RouterKind::Hrson => "hrson",
        }
    }

    /// `p_ap` applies to the baselines only.
    pub fn policy(self, p_ap: f64) -> Box<dyn RoutingPolicy> {
        match self {
            RouterKind::Epidemic => Box::new(Epidemic { p_ap }),
            RouterKind::SprayAndWait => Box::new(SprayAndWait { p_ap }),
            RouterKind::Hrson => Box::new(Hrson),
        }
    }
}

impl fmt::Display for RouterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RouterKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.to_ascii_lowercase().as_str() {
            "epidemic" => Ok(RouterKind::Epidemic),
            "snw" | "sprayandwait" | "spray-and-wait" => Ok(RouterKind::SprayAndWait),
            "hrson" => Ok(RouterKind::Hrson),
            other => Err(SimError::config(
                "routing.router",
                format!("unknown router `{other}` (expected epidemic, snw or hrson)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Epidemic {
    pub p_ap: f64,
}

impl RoutingPolicy for Epidemic {
    fn name(&self) -> &'static str {
        "epidemic"
    }
    fn ap_probability(&self, _: NodeId, _: bool) -> f64 {
        self.p_ap
    }
    fn splits_copies(&self) -> bool {
        false
    }
    fn select(&self, view: &SelectView<'_>) -> Option<MessageId> {
        view.first(view.epidemic_candidates())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SprayAndWait {
    pub p_ap: f64,
}

impl RoutingPolicy for SprayAndWait {
    fn name(&self) -> &'static str {
        "snw"
    }
    fn ap_probability(&self, _: NodeId, _: bool) -> f64 {
        self.p_ap
    }
    fn splits_copies(&self) -> bool {
        true
    }
    fn select(&self, view: &SelectView<'_>) -> Option<MessageId> {
        view.first(view.snw_candidates())
    }
}

/// Spray-and-Wait forwarding; only nodes at one of their homes become APs.
#[derive(Debug, Clone, Copy)]
pub struct Hrson;

impl RoutingPolicy for Hrson {
    fn name(&self) -> &'static str {
        "hrson"
    }
    fn ap_probability(&self, _: NodeId, at_home: bool) -> f64 {
        if at_home {
            1.0
        } else {
            0.0
        }
    }
    fn splits_copies(&self) -> bool {
        true
    }
    fn select(&self, view: &SelectView<'_>) -> Option<MessageId> {
        view.first(view.snw_candidates())
    }
}

/// Wraps a policy so that only listed nodes may take the AP role, always
/// doing so after an empty scan.
pub struct DesignatedAps {
    pub inner: Box<dyn RoutingPolicy>,
    pub aps: Vec<NodeId>,
}

impl RoutingPolicy for DesignatedAps {
    fn name(&self) -> &'static str {
        self.inner.name()
    }
    fn ap_probability(&self, node: NodeId, _: bool) -> f64 {
        if self.aps.contains(&node) {
            1.0
        } else {
            0.0
        }
    }
    fn splits_copies(&self) -> bool {
        self.inner.splits_copies()
    }
    fn select(&self, view: &SelectView<'_>) -> Option<MessageId> {
        self.inner.select(view)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::buffer::StoredCopy;
    use bitvec::vec::BitVec;

    fn msg(id: u32, dest: NodeId, created: f64) -> Message {
        Message {
            id: MessageId(id),
            source: 0,
            destination: dest,
            size: 1000,
            created_at: created,
            ttl: 1e9,
            copies: 10,
        }
    }

    fn buffer(entries: &[(u32, u32)]) -> Buffer {
        let mut b = Buffer::new(1 << 40);
        for &(id, tokens) in entries {
            b.admit(StoredCopy {
                id: MessageId(id),
                size: 1000,
                tokens,
                received_at: 0.0,
                sending: 0,
            });
        }
        b
    }

    struct Fixture {
        messages: Vec<Message>,
        outcomes: Vec<Outcome>,
        held: BitVec,
    }

    impl Fixture {
        fn new(messages: Vec<Message>) -> Self {
            let n = messages.len();
            Fixture {
                messages,
                outcomes: vec![Outcome::Alive; n],
                held: BitVec::repeat(false, n),
            }
        }

        fn view<'a>(&'a self, s: &'a Buffer, r: &'a Buffer, rid: NodeId) -> SelectView<'a> {
            SelectView {
                sender: s,
                receiver: r,
                receiver_id: rid,
                receiver_held: &self.held,
                inbound: &[],
                messages: &self.messages,
                outcomes: &self.outcomes,
                now: 0.0,
            }
        }
    }

    #[test]
    fn epidemic_puts_destination_first() {
        let f = Fixture::new(vec![msg(0, 5, 0.0), msg(1, 1, 10.0)]);
        let (s, r) = (buffer(&[(0, 1), (1, 1)]), buffer(&[]));
        assert_eq!(epidemic_select(&f.view(&s, &r, 1)), vec![MessageId(1), MessageId(0)]);
    }

    #[test]
    fn epidemic_nothing_missing() {
        let f = Fixture::new(vec![msg(0, 5, 0.0)]);
        let (s, r) = (buffer(&[(0, 1)]), buffer(&[(0, 1)]));
        assert!(epidemic_select(&f.view(&s, &r, 1)).is_empty());
    }

    #[test]
    fn summary_difference_is_symmetric() {
        let f = Fixture::new(vec![msg(0, 5, 0.0), msg(1, 5, 0.0)]);
        let (a, b) = (buffer(&[(0, 1)]), buffer(&[(1, 1)]));
        assert_eq!(epidemic_select(&f.view(&a, &b, 1)), vec![MessageId(0)]);
        assert_eq!(epidemic_select(&f.view(&b, &a, 0)), vec![MessageId(1)]);
    }

    #[test]
    fn snw_waits_with_one_token_but_still_delivers() {
        let f = Fixture::new(vec![msg(0, 5, 0.0), msg(1, 1, 0.0)]);
        let (s, r) = (buffer(&[(0, 1), (1, 1)]), buffer(&[]));
        assert_eq!(snw_select(&f.view(&s, &r, 1)), vec![MessageId(1)]);
        let s2 = buffer(&[(0, 2)]);
        assert_eq!(snw_select(&f.view(&s2, &r, 1)), vec![MessageId(0)]);
    }

    #[test]
    fn snw_skips_peers_that_held_the_message() {
        let mut f = Fixture::new(vec![msg(0, 5, 0.0)]);
        f.held.set(0, true);
        let (s, r) = (buffer(&[(0, 8)]), buffer(&[]));
        assert!(snw_select(&f.view(&s, &r, 1)).is_empty());
    }

    #[test]
    fn delivered_messages_are_not_offered_to_their_destination() {
        let mut f = Fixture::new(vec![msg(0, 1, 0.0)]);
        f.outcomes[0] = Outcome::Delivered(3.0);
        let (s, r) = (buffer(&[(0, 4)]), buffer(&[]));
        assert!(epidemic_select(&f.view(&s, &r, 1)).is_empty());
        assert!(snw_select(&f.view(&s, &r, 1)).is_empty());
    }

    #[test]
    fn token_split() {
        assert_eq!(split_tokens(10), (5, 5));
        assert_eq!(split_tokens(3), (2, 1));
        assert_eq!(split_tokens(2), (1, 1));
    }

    #[test]
    fn ap_eligibility() {
        let h = RouterKind::Hrson.policy(0.5);
        assert_eq!(h.ap_probability(0, true), 1.0);
        assert_eq!(h.ap_probability(0, false), 0.0);
        for k in [RouterKind::Epidemic, RouterKind::SprayAndWait] {
            let p = k.policy(0.5);
            assert_eq!(p.ap_probability(0, true), 0.5);
            assert_eq!(p.ap_probability(0, false), 0.5);
        }
    }

    #[test]
    fn router_names_round_trip() {
        for k in RouterKind::ALL {
            assert_eq!(k.name().parse::<RouterKind>().unwrap(), k);
            assert_eq!(k.policy(0.5).name(), k.name());
        }
        assert!("prophet".parse::<RouterKind>().is_err());
    }
}
