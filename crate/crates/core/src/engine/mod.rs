//! Simulation clock and orchestration of mobility, radio, traffic and
//! routing; Monte Carlo batches and parameter sweeps.
//!
//! Time advances in fixed ticks. Within a tick the order is: message
//! creations, TTL purge, radio timers, link refresh and byte transfers,
//! token audit, and finally movement to the next tick's positions.

mod batch;
mod queue;
pub mod rng;

use std::sync::Arc;

use rand::Rng;

use crate::error::{Result, SimError};
use crate::geometry::{Point, Rect};
use crate::map::MapContext;
use crate::metrics::MetricsReport;
use crate::mobility::{build_profiles, Mobility};
use crate::radio::{Network, RadioParams};
use crate::routing::{Custody, Exchange, Outcome, RoutingPolicy};
use crate::scenario::ScenarioConfig;
use crate::traffic::{Message, MessageId, NodeId, TrafficGenerator};

pub use batch::{run, run_batch, sweep, BatchResult, PreparedScenario, SweepRow};
pub use queue::{EventKind, EventQueue};
pub use rng::SimRng;

/// Piecewise-constant path: the node sits at the last waypoint whose start
/// time is at or before the query time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<(f64, Point)>,
}

impl Trajectory {
    pub fn fixed(p: Point) -> Self {
        Trajectory {
            waypoints: vec![(f64::NEG_INFINITY, p)],
        }
    }

    /// `waypoints` are `(from_time, position)`; the first position also
    /// holds before its start time.
    pub fn new(mut waypoints: Vec<(f64, Point)>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(SimError::Empty("trajectory"));
        }
        waypoints.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Trajectory { waypoints })
    }

    pub fn at(&self, t: f64) -> Point {
        let k = self.waypoints.partition_point(|w| w.0 <= t);
        self.waypoints[k.saturating_sub(1)].1
    }
}

/// Source of node positions.
#[derive(Debug, Clone)]
pub enum Movement {
    Wdmm(Box<Mobility>),
    Scripted(Vec<Trajectory>),
}

impl Movement {
    pub fn node_count(&self) -> usize {
        match self {
            Movement::Wdmm(m) => m.node_count(),
            Movement::Scripted(t) => t.len(),
        }
    }

    fn fill_positions(&self, now: f64, out: &mut Vec<Point>) {
        out.clear();
        match self {
            Movement::Wdmm(m) => out.extend((0..m.node_count()).map(|i| m.position(i))),
            Movement::Scripted(t) => out.extend(t.iter().map(|tr| tr.at(now))),
        }
    }

    /// Whether the node currently stays at one of its homes. Scripted nodes
    /// always count as home.
    pub fn at_home(&self, node: NodeId) -> bool {
        match self {
            Movement::Wdmm(m) => m.state(node).activity.is_home(),
            Movement::Scripted(_) => true,
        }
    }

    fn step(&mut self, now: f64, dt: f64) {
        if let Movement::Wdmm(m) = self {
            m.step(now, dt);
        }
    }
}

/// Hand-built run: fixed trajectories, chosen messages and policy.
pub struct ScriptedSetup {
    pub trajectories: Vec<Trajectory>,
    /// Created at their `created_at`; ids are reassigned in creation order.
    pub messages: Vec<Message>,
    pub policy: Box<dyn RoutingPolicy>,
    pub radio: RadioParams,
    /// Per-node time of the first scan; drawn from `radio.start_offset`
    /// when absent.
    pub start_times: Option<Vec<f64>>,
    pub buffer: u64,
    pub duration: f64,
    pub tick: f64,
    pub seed: u64,
}

impl ScriptedSetup {
    pub fn new(trajectories: Vec<Trajectory>, policy: Box<dyn RoutingPolicy>, duration: f64) -> Self {
        let n = trajectories.len();
        ScriptedSetup {
            trajectories,
            messages: Vec::new(),
            policy,
            radio: RadioParams::default(),
            start_times: Some(vec![0.0; n]),
            buffer: 100_000_000,
            duration,
            tick: 1.0,
            seed: 0,
        }
    }
}

/// One seeded execution.
pub struct Simulation {
    seed: u64,
    tick: f64,
    duration: f64,
    ticks_done: u64,
    movement: Movement,
    network: Network,
    custody: Custody,
    exchange: Exchange,
    policy: Box<dyn RoutingPolicy>,
    traffic: Option<TrafficGenerator>,
    queue: EventQueue,
    traffic_rng: SimRng,
    radio_rng: SimRng,
    policy_rng: SimRng,
    ttl_sweep_interval: f64,
    next_ttl_sweep: f64,
    token_check_interval: u64,
    positions: Vec<Point>,
}

impl Simulation {
    /// Builds a run of `cfg` on a prepared map.
    pub fn from_config(cfg: &ScenarioConfig, map: Arc<MapContext>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.node_count();
        let mut mobility_rng = rng::stream(seed, rng::MOBILITY);
        let mut radio_rng = rng::stream(seed, rng::RADIO);
        let mut traffic_rng = rng::stream(seed, rng::TRAFFIC);
        let profiles = build_profiles(
            n,
            cfg.nodes.groups,
            &map.pois,
            cfg.mobility.car_probability,
            &mut mobility_rng,
        )?;
        let bounds = map.graph.bounds();
        let mobility = Mobility::new(map, profiles, cfg.mobility.clone(), mobility_rng)?;
        let network = Network::new(n, cfg.radio.clone(), bounds, &mut radio_rng)?;
        let traffic = TrafficGenerator::new(cfg.traffic.clone(), cfg.routing.copies, n, cfg.engine.duration)?;
        let mut queue = EventQueue::new();
        if let Some(t) = traffic.first(&mut traffic_rng) {
            queue.push(t, EventKind::Traffic);
        }
        Ok(Simulation {
            seed,
            tick: cfg.engine.tick,
            duration: cfg.engine.duration,
            ticks_done: 0,
            movement: Movement::Wdmm(Box::new(mobility)),
            network,
            custody: Custody::new(n, cfg.routing.buffer),
            exchange: Exchange::new(),
            policy: cfg.routing.router.policy(cfg.routing.p_ap),
            traffic: Some(traffic),
            queue,
            traffic_rng,
            radio_rng,
            policy_rng: rng::stream(seed, rng::POLICY),
            ttl_sweep_interval: cfg.engine.ttl_sweep_interval,
            next_ttl_sweep: cfg.engine.ttl_sweep_interval,
            token_check_interval: cfg.engine.token_check_interval,
            positions: Vec::with_capacity(n),
        })
    }

    pub fn scripted(setup: ScriptedSetup) -> Result<Self> {
        let n = setup.trajectories.len();
        if n < 2 {
            return Err(SimError::TooFewNodes(n));
        }
        if !(setup.duration > 0.0 && setup.tick > 0.0) {
            return Err(SimError::config("engine", "duration and tick must be positive"));
        }
        for m in &setup.messages {
            if m.source >= n || m.destination >= n || m.source == m.destination {
                return Err(SimError::config("messages", format!("bad endpoints for {}", m.id)));
            }
        }
        let mut radio_rng = rng::stream(setup.seed, rng::RADIO);
        let bounds = scripted_bounds(&setup.trajectories, setup.radio.range);
        let network = match setup.start_times {
            Some(s) if s.len() == n => Network::with_start_times(s, setup.radio, bounds)?,
            Some(_) => return Err(SimError::config("start_times", "one entry per node")),
            None => Network::new(n, setup.radio, bounds, &mut radio_rng)?,
        };
        let mut queue = EventQueue::new();
        for m in setup.messages {
            queue.push(m.created_at, EventKind::Inject(m));
        }
        Ok(Simulation {
            seed: setup.seed,
            tick: setup.tick,
            duration: setup.duration,
            ticks_done: 0,
            movement: Movement::Scripted(setup.trajectories),
            network,
            custody: Custody::new(n, setup.buffer),
            exchange: Exchange::with_log(),
            policy: setup.policy,
            traffic: None,
            queue,
            traffic_rng: rng::stream(setup.seed, rng::TRAFFIC),
            radio_rng,
            policy_rng: rng::stream(setup.seed, rng::POLICY),
            ttl_sweep_interval: 60.0,
            next_ttl_sweep: 60.0,
            token_check_interval: 100,
            positions: Vec::with_capacity(n),
        })
    }

    pub fn now(&self) -> f64 {
        self.ticks_done as f64 * self.tick
    }

    pub fn is_finished(&self) -> bool {
        self.now() >= self.duration - 1e-9
    }

    pub fn movement(&self) -> &Movement {
        &self.movement
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn custody(&self) -> &Custody {
        &self.custody
    }

    pub fn exchange(&self) -> &Exchange {
        &self.exchange
    }

    pub fn outcome(&self, id: MessageId) -> Outcome {
        self.custody.outcome(id)
    }

    /// Positions used for the most recent tick.
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    fn create_due(&mut self, now: f64) -> Result<()> {
        while let Some((t, kind)) = self.queue.pop_due(now) {
            let id = MessageId(self.custody.messages().len() as u32);
            let message = match kind {
                EventKind::Inject(m) => Message { id, ..m },
                EventKind::Traffic => {
                    let generator = self.traffic.as_mut().expect("traffic events need a generator");
                    let m = generator.create(t, &mut self.traffic_rng)?;
                    if let Some(next) = generator.following(t, &mut self.traffic_rng) {
                        self.queue.push(next, EventKind::Traffic);
                    }
                    Message { id, ..m }
                }
            };
            self.custody.create(message, now)?;
        }
        Ok(())
    }

    /// Advances one tick.
    pub fn step(&mut self) -> Result<()> {
        let now = self.now();
        let dt = self.tick;
        self.create_due(now)?;
        if now >= self.next_ttl_sweep {
            self.custody.sweep_ttl(now);
            self.next_ttl_sweep += self.ttl_sweep_interval;
        }
        self.movement.fill_positions(now, &mut self.positions);
        {
            let movement = &self.movement;
            let policy = self.policy.as_ref();
            let policy_rng = &mut self.policy_rng;
            let mut may_become_ap = |node: NodeId| {
                let p = policy.ap_probability(node, movement.at_home(node));
                p >= 1.0 || (p > 0.0 && policy_rng.gen_bool(p))
            };
            self.network
                .step(now, &self.positions, &mut may_become_ap, &mut self.radio_rng);
        }
        self.exchange.sync(self.network.links(), &mut self.custody, now);
        let network = &self.network;
        self.exchange.progress(
            now,
            dt,
            &|ap| network.ap_share(ap),
            &mut self.custody,
            self.policy.as_ref(),
        );
        self.ticks_done += 1;
        if self.policy.splits_copies() && self.ticks_done.is_multiple_of(self.token_check_interval) {
            self.custody.check_tokens(now + dt)?;
        }
        self.movement.step(now, dt);
        Ok(())
    }

    /// Runs to the configured duration and closes the books.
    pub fn run(mut self) -> Result<MetricsReport> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.finish())
    }

    /// Aborts open transfers and produces the report at the current time.
    pub fn finish(&mut self) -> MetricsReport {
        let end = self.now().min(self.duration);
        self.exchange.sync(std::iter::empty(), &mut self.custody, end);
        self.custody.finish(end, self.seed, self.policy.name())
    }
}

fn scripted_bounds(trajectories: &[Trajectory], margin: f64) -> Rect {
    let pts = trajectories.iter().flat_map(|t| t.waypoints.iter().map(|w| w.1));
    let (mut x0, mut y0, mut x1, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    Rect::new(x0 - margin, y0 - margin, x1 + margin, y1 + margin)
}
