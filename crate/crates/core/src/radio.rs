//! Infrastructure-mode WiFi role machine.
//!
//! A node scans for access points; if one is visible it connects as a
//! client, otherwise it may become an access point itself when the routing
//! policy allows it, or rests and scans again. Clients periodically look for
//! a faster AP. Access points retire after an idle period or a maximum tenure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{Point, Rect};
use crate::map::SpatialGrid;
use crate::traffic::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingParams {
    pub scan: f64,
    pub rest: f64,
    pub become_ap: f64,
    pub connect: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            scan: 5.0,
            rest: 1.0,
            become_ap: 1.0,
            connect: 5.0,
        }
    }
}

/// Time from two idle co-located nodes meeting until they share a network.
pub fn net_initiate_time(t: &TimingParams) -> f64 {
    t.scan + t.become_ap + t.scan + t.connect
}

/// Time for a client that lost its AP to be connected again.
pub fn net_reinitiate_time(t: &TimingParams, ap_available: bool) -> f64 {
    if ap_available {
        t.scan + t.connect
    } else {
        net_initiate_time(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    pub timing: TimingParams,
    /// Link speed in bytes per second.
    pub base_speed: f64,
    pub range: f64,
    pub channels: u8,
    /// Period of the connected client's search for a faster AP.
    pub rescan_interval: f64,
    /// A client switches only to an AP at least this many times faster.
    pub switch_factor: f64,
    pub ap_idle_timeout: f64,
    pub ap_max_duration: f64,
    /// Each node's first scan starts at a uniform offset from this range.
    pub start_offset: [f64; 2],
    /// Rest after retiring from the AP role.
    pub retire_rest: [f64; 2],
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            timing: TimingParams::default(),
            base_speed: 5e6,
            range: 20.0,
            channels: 5,
            rescan_interval: 30.0,
            switch_factor: 1.25,
            ap_idle_timeout: 60.0,
            ap_max_duration: 600.0,
            start_offset: [0.0, 10.0],
            retire_rest: [1.0, 10.0],
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let t = &self.timing;
        if [t.scan, t.rest, t.become_ap, t.connect]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(SimError::config("radio.timing", "timings must be nonnegative"));
        }
        if self.base_speed.is_nan() || self.base_speed <= 0.0 {
            return Err(SimError::config("radio.base_speed", "must be positive"));
        }
        if self.range.is_nan() || self.range <= 0.0 {
            return Err(SimError::config("radio.range", "must be positive"));
        }
        if self.channels == 0 {
            return Err(SimError::config("radio.channels", "must be at least 1"));
        }
        if self.rescan_interval.is_nan() || self.rescan_interval <= 0.0 {
            return Err(SimError::config("radio.rescan_interval", "must be positive"));
        }
        if self.switch_factor.is_nan() || self.switch_factor < 1.0 {
            return Err(SimError::config("radio.switch_factor", "must be at least 1"));
        }
        if !(self.ap_idle_timeout >= 0.0 && self.ap_max_duration > 0.0) {
            return Err(SimError::config(
                "radio.ap_max_duration",
                "AP timeouts must be nonnegative and tenure positive",
            ));
        }
        for (key, [a, b]) in [
            ("radio.start_offset", self.start_offset),
            ("radio.retire_rest", self.retire_rest),
        ] {
            if !(a >= 0.0 && a <= b && b.is_finite()) {
                return Err(SimError::config(key, "needs 0 <= min <= max"));
            }
        }
        Ok(())
    }
}

/// Coarse role as seen by other layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Idle,
    Scanning,
    AccessPoint,
    Client,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    /// Resting until the next scan.
    Idle { until: f64 },
    Scanning { until: f64 },
    BecomingAp { until: f64 },
    Connecting { ap: NodeId, until: f64 },
    AccessPoint {
        since: f64,
        channel: u8,
        /// Last time the AP had at least one client.
        busy_at: f64,
    },
    Client {
        ap: NodeId,
        next_rescan: f64,
        /// Completion time of an ongoing faster-AP scan.
        scan_until: Option<f64>,
    },
}

impl Phase {
    pub fn role(&self) -> Role {
        match self {
            Phase::Idle { .. } | Phase::BecomingAp { .. } => Role::Idle,
            Phase::Scanning { .. } | Phase::Connecting { .. } => Role::Scanning,
            Phase::AccessPoint { .. } => Role::AccessPoint,
            Phase::Client { .. } => Role::Client,
        }
    }
}

/// Least-loaded channel in `1..=channels` given neighbouring APs' channels;
/// ties go to the lowest channel.
pub fn assign_channel(channels: u8, nearby: impl IntoIterator<Item = u8>) -> u8 {
    let mut load = vec![0usize; channels as usize];
    for c in nearby {
        if (1..=channels).contains(&c) {
            load[c as usize - 1] += 1;
        }
    }
    let mut best = 0;
    for (i, &l) in load.iter().enumerate() {
        if l < load[best] {
            best = i;
        }
    }
    best as u8 + 1
}

/// Per-transfer rate at an AP sharing its channel with `co_channel` APs
/// (itself included) and serving `active` concurrent transfers.
pub fn effective_bandwidth(base_speed: f64, co_channel: usize, active: usize) -> f64 {
    base_speed / co_channel.max(1) as f64 / active.max(1) as f64
}

/// Radio state of every node in a run.
#[derive(Debug, Clone)]
pub struct Network {
    params: RadioParams,
    phases: Vec<Phase>,
    grid: SpatialGrid,
    /// Sorted client lists, indexed by AP.
    clients: Vec<Vec<NodeId>>,
    /// Co-channel AP count per AP (self included); zero for non-APs.
    co_channel: Vec<usize>,
    born: Vec<NodeId>,
}

impl Network {
    /// All nodes start idle with a random offset before their first scan.
    pub fn new<R: Rng + ?Sized>(
        nodes: usize,
        params: RadioParams,
        bounds: Rect,
        rng: &mut R,
    ) -> Result<Self> {
        let [a, b] = params.start_offset;
        let starts = (0..nodes)
            .map(|_| if a >= b { a } else { rng.gen_range(a..=b) })
            .collect();
        Self::with_start_times(starts, params, bounds)
    }

    pub fn with_start_times(starts: Vec<f64>, params: RadioParams, bounds: Rect) -> Result<Self> {
        params.validate()?;
        let n = starts.len();
        let cell = params.range;
        Ok(Network {
            phases: starts.into_iter().map(|until| Phase::Idle { until }).collect(),
            grid: SpatialGrid::new(bounds, cell),
            clients: vec![Vec::new(); n],
            co_channel: vec![0; n],
            born: Vec::new(),
            params,
        })
    }

    pub fn params(&self) -> &RadioParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phase(&self, node: NodeId) -> Phase {
        self.phases[node]
    }

    pub fn role(&self, node: NodeId) -> Role {
        self.phases[node].role()
    }

    pub fn is_ap(&self, node: NodeId) -> bool {
        matches!(self.phases[node], Phase::AccessPoint { .. })
    }

    pub fn channel(&self, node: NodeId) -> Option<u8> {
        match self.phases[node] {
            Phase::AccessPoint { channel, .. } => Some(channel),
            _ => None,
        }
    }

    pub fn ap_of(&self, node: NodeId) -> Option<NodeId> {
        match self.phases[node] {
            Phase::Client { ap, .. } => Some(ap),
            _ => None,
        }
    }

    pub fn clients(&self, ap: NodeId) -> &[NodeId] {
        &self.clients[ap]
    }

    /// Established `(ap, client)` links in client order.
    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.phases.len()).filter_map(|c| self.ap_of(c).map(|ap| (ap, c)))
    }

    /// Bandwidth an AP can spend across all its transfers.
    pub fn ap_share(&self, ap: NodeId) -> f64 {
        effective_bandwidth(self.params.base_speed, self.co_channel[ap], 1)
    }

    pub fn co_channel_count(&self, ap: NodeId) -> usize {
        self.co_channel[ap]
    }

    /// Node has an established link, as a client or as an AP with clients.
    pub fn is_connected(&self, node: NodeId) -> bool {
        match self.phases[node] {
            Phase::Client { .. } => true,
            Phase::AccessPoint { .. } => !self.clients[node].is_empty(),
            _ => false,
        }
    }

    fn in_range(&self, positions: &[Point], a: NodeId, b: NodeId) -> bool {
        positions[a].distance(positions[b]) <= self.params.range
    }

    fn refresh(&mut self, positions: &[Point]) {
        let phases = &self.phases;
        self.grid.rebuild(
            (0..phases.len())
                .filter(|&i| matches!(phases[i], Phase::AccessPoint { .. }))
                .map(|i| (i as u32, positions[i])),
        );
        self.born.clear();
        for c in &mut self.clients {
            c.clear();
        }
        for node in 0..self.phases.len() {
            if let Phase::Client { ap, .. } = self.phases[node] {
                self.clients[ap].push(node);
            }
        }
    }

    /// APs within range of `p`, including ones created earlier this tick.
    fn aps_near(&self, positions: &[Point], p: Point) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .grid
            .within(p, self.params.range)
            .into_iter()
            .map(|i| i as NodeId)
            .filter(|&i| self.is_ap(i))
            .collect();
        for &b in &self.born {
            if positions[b].distance(p) <= self.params.range && !out.contains(&b) {
                out.push(b);
            }
        }
        out.sort_unstable();
        out
    }

    fn co_channel_at(&self, positions: &[Point], ap: NodeId) -> usize {
        let ch = self.channel(ap);
        let p = positions[ap];
        let mut count = 0;
        self.grid.for_each_within(p, self.params.range, |o, _| {
            let o = o as NodeId;
            if self.is_ap(o) && self.channel(o) == ch {
                count += 1;
            }
        });
        // Nodes that became AP since the last rebuild are not indexed yet.
        for &b in &self.born {
            if positions[b].distance(p) <= self.params.range && self.channel(b) == ch {
                count += 1;
            }
        }
        count.max(1)
    }

    /// Estimated per-client bandwidth at `ap` if `node` were one of its clients.
    fn estimate(&self, positions: &[Point], ap: NodeId, node: NodeId) -> f64 {
        let members = self.clients[ap].iter().filter(|&&c| c != node).count() + 1;
        effective_bandwidth(
            self.params.base_speed,
            self.co_channel_at(positions, ap),
            members,
        )
    }

    /// Fastest visible AP for `node`; ties go to the lowest id.
    fn best_ap(&self, positions: &[Point], node: NodeId, exclude: Option<NodeId>) -> Option<(NodeId, f64)> {
        let mut best: Option<(NodeId, f64)> = None;
        for ap in self.aps_near(positions, positions[node]) {
            if ap == node || Some(ap) == exclude {
                continue;
            }
            let bw = self.estimate(positions, ap, node);
            if best.is_none_or(|(_, b)| bw > b) {
                best = Some((ap, bw));
            }
        }
        best
    }

    fn teardown(&mut self, positions: &[Point], now: f64) {
        let scan = self.params.timing.scan;
        for node in 0..self.phases.len() {
            if let Phase::Client { ap, .. } = self.phases[node] {
                if !self.is_ap(ap) || !self.in_range(positions, ap, node) {
                    self.phases[node] = Phase::Scanning { until: now + scan };
                }
            }
        }
    }

    /// Processes all timers due at `now` with node positions `positions`.
    ///
    /// `may_become_ap(node)` is consulted after a scan finds no AP.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        now: f64,
        positions: &[Point],
        may_become_ap: &mut dyn FnMut(NodeId) -> bool,
        rng: &mut R,
    ) {
        debug_assert_eq!(positions.len(), self.phases.len());
        self.teardown(positions, now);
        self.refresh(positions);
        for node in 0..self.phases.len() {
            // Bounded so that zero timings cannot spin forever.
            for _ in 0..4 {
                if !self.advance(node, now, positions, may_become_ap, rng) {
                    break;
                }
            }
        }
        self.teardown(positions, now);
        self.refresh(positions);
        for ap in 0..self.phases.len() {
            self.co_channel[ap] = if self.is_ap(ap) {
                self.co_channel_at(positions, ap)
            } else {
                0
            };
        }
    }

    /// Fires the node's due timer, if any. Returns whether the phase changed.
    fn advance<R: Rng + ?Sized>(
        &mut self,
        node: NodeId,
        now: f64,
        positions: &[Point],
        may_become_ap: &mut dyn FnMut(NodeId) -> bool,
        rng: &mut R,
    ) -> bool {
        let t = self.params.timing;
        let next = match self.phases[node] {
            Phase::Idle { until } if until <= now => Phase::Scanning {
                until: now + t.scan,
            },
            Phase::Scanning { until } if until <= now => {
                match self.best_ap(positions, node, None) {
                    Some((ap, _)) => Phase::Connecting {
                        ap,
                        until: now + t.connect,
                    },
                    None if may_become_ap(node) => Phase::BecomingAp {
                        until: now + t.become_ap,
                    },
                    None => Phase::Idle {
                        until: now + t.rest,
                    },
                }
            }
            Phase::BecomingAp { until } if until <= now => {
                let near = self.aps_near(positions, positions[node]);
                let channel = assign_channel(
                    self.params.channels,
                    near.into_iter().filter_map(|o| self.channel(o)),
                );
                self.born.push(node);
                Phase::AccessPoint {
                    since: now,
                    channel,
                    busy_at: now,
                }
            }
            Phase::Connecting { ap, until } if until <= now => {
                if self.is_ap(ap) && self.in_range(positions, ap, node) {
                    self.clients[ap].push(node);
                    self.clients[ap].sort_unstable();
                    Phase::Client {
                        ap,
                        next_rescan: now + self.params.rescan_interval,
                        scan_until: None,
                    }
                } else {
                    Phase::Scanning {
                        until: now + t.scan,
                    }
                }
            }
            Phase::Client {
                ap,
                next_rescan,
                scan_until,
            } => match scan_until {
                Some(done) if done <= now => {
                    let current = self.estimate(positions, ap, node);
                    match self.best_ap(positions, node, Some(ap)) {
                        Some((cand, bw)) if bw >= self.params.switch_factor * current => {
                            self.clients[ap].retain(|&c| c != node);
                            Phase::Connecting {
                                ap: cand,
                                until: now + t.connect,
                            }
                        }
                        _ => Phase::Client {
                            ap,
                            next_rescan: now + self.params.rescan_interval,
                            scan_until: None,
                        },
                    }
                }
                None if next_rescan <= now => Phase::Client {
                    ap,
                    next_rescan,
                    scan_until: Some(now + t.scan),
                },
                _ => return false,
            },
            Phase::AccessPoint {
                since,
                channel,
                busy_at,
            } => {
                let busy_at = if self.clients[node].is_empty() { busy_at } else { now };
                let idle = now - busy_at >= self.params.ap_idle_timeout;
                let tenure = now - since >= self.params.ap_max_duration;
                if idle || tenure {
                    let [a, b] = self.params.retire_rest;
                    let rest = if a >= b { a } else { rng.gen_range(a..=b) };
                    self.born.retain(|&b| b != node);
                    Phase::Idle { until: now + rest }
                } else {
                    self.phases[node] = Phase::AccessPoint {
                        since,
                        channel,
                        busy_at,
                    };
                    return false;
                }
            }
            _ => return false,
        };
        self.phases[node] = next;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bounds() -> Rect {
        Rect::new(0.0, 0.0, 2000.0, 200.0)
    }

    fn scripted(starts: Vec<f64>) -> Network {
        Network::with_start_times(starts, RadioParams::default(), bounds()).unwrap()
    }

    #[test]
    fn timing_algebra() {
        let d = TimingParams::default();
        assert_eq!(net_initiate_time(&d), 16.0);
        assert_eq!(net_reinitiate_time(&d, true), 10.0);
        assert_eq!(net_reinitiate_time(&d, false), 16.0);
        let z = TimingParams {
            scan: 0.0,
            rest: 0.0,
            become_ap: 0.0,
            connect: 0.0,
        };
        assert_eq!(net_initiate_time(&z), 0.0);
        assert_eq!(net_reinitiate_time(&z, true), 0.0);
        assert_eq!(net_reinitiate_time(&z, false), 0.0);
        let t = TimingParams {
            scan: 3.0,
            rest: 0.0,
            become_ap: 2.0,
            connect: 4.0,
        };
        assert_eq!(net_initiate_time(&t), 12.0);
    }

    #[test]
    fn channel_choice() {
        assert_eq!(assign_channel(5, []), 1);
        assert_eq!(assign_channel(5, [1, 1, 2, 3, 4, 5]), 2);
        assert_eq!(assign_channel(5, [1, 2, 3, 4, 5]), 1);
        assert_eq!(assign_channel(5, [1, 2]), 3);
    }

    #[test]
    fn bandwidth_sharing() {
        assert_eq!(effective_bandwidth(5e6, 1, 1), 5e6);
        assert_eq!(effective_bandwidth(5e6, 1, 2), 2.5e6);
        assert_eq!(effective_bandwidth(5e6, 2, 1), 2.5e6);
    }

    /// Steps every second from `from` to `to` (exclusive).
    fn run(
        net: &mut Network,
        from: u32,
        to: u32,
        pos: &dyn Fn(f64) -> Vec<Point>,
        allow: &dyn Fn(NodeId, f64) -> bool,
        mut each: impl FnMut(f64, &Network),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in from..to {
            let now = t as f64;
            let p = pos(now);
            net.step(now, &p, &mut |n| allow(n, now), &mut rng);
            each(now, net);
        }
    }

    #[test]
    fn two_nodes_link_after_initiate_time() {
        let mut net = scripted(vec![0.0, 0.0]);
        let pos = |_| vec![Point::new(10.0, 10.0), Point::new(12.0, 10.0)];
        let mut first = None;
        run(&mut net, 0, 40, &pos, &|n, _| n == 0, |t, net| {
            if first.is_none() && net.links().next().is_some() {
                first = Some(t);
            }
        });
        assert_eq!(first, Some(16.0));
        assert_eq!(net.links().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(net.role(0), Role::AccessPoint);
        assert_eq!(net.role(1), Role::Client);
    }

    #[test]
    fn visibility_boundary() {
        for (d, visible) in [(19.9, true), (20.1, false)] {
            let mut net = scripted(vec![0.0, 0.0]);
            let pos = move |_| vec![Point::new(10.0, 10.0), Point::new(10.0 + d, 10.0)];
            run(&mut net, 0, 30, &pos, &|n, _| n == 0, |_, _| {});
            assert_eq!(net.ap_of(1).is_some(), visible, "distance {d}");
        }
    }

    #[test]
    fn denied_node_keeps_scanning() {
        let mut net = scripted(vec![0.0]);
        let pos = |_| vec![Point::new(1.0, 1.0)];
        let mut roles = Vec::new();
        run(&mut net, 0, 20, &pos, &|_, _| false, |_, net| roles.push(net.role(0)));
        assert!(roles.iter().all(|r| matches!(r, Role::Idle | Role::Scanning)));
        assert_eq!(roles[5], Role::Idle);
        assert_eq!(roles[6], Role::Scanning);
    }

    #[test]
    fn permitted_node_becomes_ap_after_one_second() {
        let mut net = scripted(vec![0.0]);
        let pos = |_| vec![Point::new(1.0, 1.0)];
        let mut roles = Vec::new();
        run(&mut net, 0, 8, &pos, &|_, _| true, |_, net| roles.push(net.role(0)));
        assert_eq!(roles[4], Role::Scanning);
        assert_eq!(roles[5], Role::Idle);
        assert_eq!(roles[6], Role::AccessPoint);
        assert_eq!(net.channel(0), Some(1));
    }

    #[test]
    fn alternate_ap_gives_short_gap() {
        // AP 0 and AP 2 serve clients 1 and 3; AP 0 leaves at t=100.
        let mut net = scripted(vec![0.0; 4]);
        let pos = |t: f64| {
            let x0 = if t >= 100.0 { 1000.0 } else { 0.0 };
            vec![
                Point::new(x0, 0.0),
                Point::new(5.0, 0.0),
                Point::new(15.0, 0.0),
                Point::new(30.0, 0.0),
            ]
        };
        let mut down = Vec::new();
        run(&mut net, 0, 200, &pos, &|n, _| n == 0 || n == 2, |t, net| {
            if t >= 20.0 && net.ap_of(1).is_none() {
                down.push(t);
            }
        });
        assert_eq!(down.first(), Some(&100.0));
        assert_eq!(down.len(), 10);
        assert_eq!(net.ap_of(1), Some(2));
    }

    #[test]
    fn lone_ap_retires_after_idle_timeout() {
        let mut net = scripted(vec![0.0]);
        let pos = |_| vec![Point::new(1.0, 1.0)];
        let mut became = None;
        let mut retired = None;
        run(&mut net, 0, 100, &pos, &|_, _| true, |t, net| {
            if net.is_ap(0) && became.is_none() {
                became = Some(t);
            }
            if became.is_some() && !net.is_ap(0) && retired.is_none() {
                retired = Some(t);
            }
        });
        assert_eq!(retired.unwrap() - became.unwrap(), 60.0);
    }

    #[test]
    fn busy_ap_retires_at_tenure_and_client_rescans() {
        let mut net = scripted(vec![0.0, 0.0]);
        let pos = |_| vec![Point::new(10.0, 10.0), Point::new(12.0, 10.0)];
        let mut retired = None;
        let mut client_lost = None;
        let mut role_at_retire = None;
        run(&mut net, 0, 700, &pos, &|n, _| n == 0, |t, net| {
            if t == 606.0 {
                role_at_retire = Some(net.role(1));
            }
            if t > 6.0 && !net.is_ap(0) && retired.is_none() {
                retired = Some(t);
            }
            if t > 16.0 && net.ap_of(1).is_none() && client_lost.is_none() {
                client_lost = Some(t);
            }
        });
        assert_eq!(retired, Some(606.0));
        assert_eq!(client_lost, Some(606.0));
        assert_eq!(role_at_retire, Some(Role::Scanning));
    }

    #[test]
    fn clients_always_attached_to_in_range_ap() {
        let n = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = Network::new(n, RadioParams::default(), bounds(), &mut rng).unwrap();
        let mut pos: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
            .collect();
        let mut policy_rng = ChaCha8Rng::seed_from_u64(8);
        for t in 0..2000 {
            for p in &mut pos {
                p.x = (p.x + rng.gen_range(-1.4..1.4)).clamp(0.0, 100.0);
                p.y = (p.y + rng.gen_range(-1.4..1.4)).clamp(0.0, 100.0);
            }
            net.step(t as f64, &pos, &mut |_| policy_rng.gen_bool(0.5), &mut rng);
            for c in 0..n {
                if let Some(ap) = net.ap_of(c) {
                    assert!(net.is_ap(ap));
                    assert!(pos[ap].distance(pos[c]) <= 20.0);
                    assert!(net.ap_of(ap).is_none());
                }
                if net.is_ap(c) {
                    assert!(net.ap_share(c) <= 5e6);
                    assert!(net.co_channel_count(c) >= 1);
                }
            }
        }
    }
}
