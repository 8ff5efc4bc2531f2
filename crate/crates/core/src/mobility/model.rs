use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::{
    build_bus_lines, form_evening_groups, log_uniform, schedule_day, uniform, BusLine, BusVehicle,
    DailyPlan, EveningGroup, LineId, MobilityParams, NodeProfile, SECONDS_PER_DAY,
};
use crate::error::{Result, SimError};
use crate::geometry::Point;
use crate::map::{office_area_rect, shortest_path, MapContext, PoiId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activity {
    AtHouse,
    CommuteToOffice,
    AtOffice,
    CommuteToEvening,
    AtEveningSpot,
    CommuteToHouse,
}

impl Activity {
    /// The house, office, and evening spot are a node's homes; transit never is.
    pub fn is_home(self) -> bool {
        matches!(
            self,
            Activity::AtHouse | Activity::AtOffice | Activity::AtEveningSpot
        )
    }

    fn arrival(self) -> Activity {
        match self {
            Activity::CommuteToOffice => Activity::AtOffice,
            Activity::CommuteToEvening => Activity::AtEveningSpot,
            Activity::CommuteToHouse => Activity::AtHouse,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Walk,
    Car,
    Bus(LineId),
}

#[derive(Debug, Clone, PartialEq)]
enum Leg {
    Move {
        waypoints: Vec<Point>,
        next: usize,
        speed: f64,
    },
    WaitBus {
        line: LineId,
        board: usize,
        alight: usize,
    },
    Ride {
        bus: usize,
        alight: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub activity: Activity,
    pub position: Point,
    pub transport: Transport,
    /// End of the current in-office pause.
    pub pause_until: f64,
    pub work_until: f64,
    legs: VecDeque<Leg>,
    office_move: Option<(Point, f64)>,
    plan: Option<DailyPlan>,
}

impl MobilityState {
    pub fn at_house(position: Point) -> Self {
        MobilityState {
            activity: Activity::AtHouse,
            position,
            transport: Transport::Walk,
            pause_until: 0.0,
            work_until: 0.0,
            legs: VecDeque::new(),
            office_move: None,
            plan: None,
        }
    }

    /// Bus index the node is riding, if aboard.
    pub fn riding(&self) -> Option<usize> {
        match self.legs.front() {
            Some(Leg::Ride { bus, .. }) => Some(*bus),
            _ => None,
        }
    }
}

/// Moves from `position` through `waypoints[next..]` for `dt` seconds.
///
/// Returns the new position, the index of the next unreached waypoint, and
/// the unused part of `dt` (nonzero only when the last waypoint was reached).
pub fn move_along(
    mut position: Point,
    waypoints: &[Point],
    mut next: usize,
    speed: f64,
    dt: f64,
) -> (Point, usize, f64) {
    let mut budget = speed * dt;
    while next < waypoints.len() {
        let d = position.distance(waypoints[next]);
        if d <= budget + 1e-9 {
            position = waypoints[next];
            budget = (budget - d).max(0.0);
            next += 1;
        } else {
            position = position.towards(waypoints[next], budget);
            budget = 0.0;
            break;
        }
    }
    let left = if next >= waypoints.len() && speed > 0.0 {
        budget / speed
    } else {
        0.0
    };
    (position, next, left)
}

/// Movement of every node in one run, plus the bus fleet.
#[derive(Debug, Clone)]
pub struct Mobility {
    map: Arc<MapContext>,
    params: MobilityParams,
    profiles: Vec<NodeProfile>,
    states: Vec<MobilityState>,
    plans: Vec<DailyPlan>,
    groups: BTreeMap<u32, Vec<EveningGroup>>,
    lines: Vec<BusLine>,
    buses: Vec<BusVehicle>,
    rng: ChaCha8Rng,
    day: Option<u32>,
}

impl Mobility {
    pub fn new(
        map: Arc<MapContext>,
        profiles: Vec<NodeProfile>,
        params: MobilityParams,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        params.validate()?;
        check_poi_connectivity(&map)?;
        let lines = build_bus_lines(&map)?;
        let mut buses = Vec::new();
        for line in &lines {
            for k in 0..params.buses_per_line {
                buses.push(BusVehicle::new(
                    line,
                    k * line.stop_count() / params.buses_per_line.max(1),
                ));
            }
        }
        let states = profiles
            .iter()
            .map(|p| MobilityState::at_house(map.poi_position(p.house)))
            .collect();
        Ok(Mobility {
            map,
            params,
            profiles,
            states,
            plans: Vec::new(),
            groups: BTreeMap::new(),
            lines,
            buses,
            rng,
            day: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, node: usize) -> &MobilityState {
        &self.states[node]
    }

    pub fn position(&self, node: usize) -> Point {
        self.states[node].position
    }

    pub fn profile(&self, node: usize) -> &NodeProfile {
        &self.profiles[node]
    }

    pub fn profiles(&self) -> &[NodeProfile] {
        &self.profiles
    }

    pub fn plans(&self) -> &[DailyPlan] {
        &self.plans
    }

    pub fn lines(&self) -> &[BusLine] {
        &self.lines
    }

    pub fn buses(&self) -> &[BusVehicle] {
        &self.buses
    }

    pub fn map(&self) -> &MapContext {
        &self.map
    }

    fn start_day(&mut self, day: u32) {
        let day_start = day as f64 * SECONDS_PER_DAY;
        let mut plans: Vec<DailyPlan> = self
            .profiles
            .iter()
            .map(|p| schedule_day(p, day, day_start, &self.params, &mut self.rng))
            .collect();
        let groups = form_evening_groups(&mut plans, &self.params, &mut self.rng);
        self.plans = plans;
        self.groups.insert(day, groups);
        self.groups.retain(|&d, _| d + 2 > day);
        self.day = Some(day);
    }

    /// Advances buses and nodes over `[now, now + dt)`.
    pub fn step(&mut self, now: f64, dt: f64) {
        let day = (now / SECONDS_PER_DAY).floor().max(0.0) as u32;
        if self.day != Some(day) {
            self.start_day(day);
        }
        for bus in &mut self.buses {
            bus.step(&self.lines[bus.line], &self.params, now, dt, &mut self.rng);
        }
        for node in 0..self.states.len() {
            self.step_node(node, now, dt);
        }
    }

    fn step_node(&mut self, node: usize, now: f64, dt: f64) {
        let profile = self.profiles[node];
        match self.states[node].activity {
            Activity::AtHouse => {
                let plan = self.plans[node];
                let started = self.states[node].plan.is_some_and(|p| p.day >= plan.day);
                if !started && now >= plan.departure {
                    self.states[node].plan = Some(plan);
                    self.begin_trip(node, profile.house, profile.office, Activity::CommuteToOffice);
                    self.advance_trip(node, now, dt);
                }
            }
            Activity::AtOffice => {
                if now >= self.states[node].work_until {
                    let plan = self.states[node].plan.expect("plan active at office");
                    let (dest, next) = match plan.evening {
                        Some(ev) => (ev.spot, Activity::CommuteToEvening),
                        None => (profile.house, Activity::CommuteToHouse),
                    };
                    self.states[node].office_move = None;
                    self.begin_trip(node, profile.office, dest, next);
                    self.advance_trip(node, now, dt);
                } else {
                    self.office_step(node, now, dt);
                }
            }
            Activity::AtEveningSpot => {
                let plan = self.states[node].plan.expect("plan active at evening spot");
                let ev = plan.evening.expect("evening visit");
                let done = match ev.group {
                    Some(g) => self
                        .groups
                        .get(&plan.day)
                        .and_then(|gs| gs[g].ends_at())
                        .is_some_and(|end| now >= end),
                    None => true,
                };
                if done {
                    self.begin_trip(node, ev.spot, profile.house, Activity::CommuteToHouse);
                    self.advance_trip(node, now, dt);
                }
            }
            Activity::CommuteToOffice | Activity::CommuteToEvening | Activity::CommuteToHouse => {
                self.advance_trip(node, now, dt);
            }
        }
    }

    fn office_step(&mut self, node: usize, now: f64, dt: f64) {
        let office = self.map.poi(self.profiles[node].office);
        let area = office_area_rect(&self.map.graph, office);
        let st = &mut self.states[node];
        if st.office_move.is_none() && now >= st.pause_until {
            let target = Point::new(
                uniform(&mut self.rng, [area.min.x, area.max.x]),
                uniform(&mut self.rng, [area.min.y, area.max.y]),
            );
            let speed = uniform(&mut self.rng, self.params.walk_speed);
            st.office_move = Some((target, speed));
        }
        if let Some((target, speed)) = st.office_move {
            let (p, next, _) = move_along(st.position, &[target], 0, speed, dt);
            st.position = area.clamp(p);
            if next == 1 {
                st.office_move = None;
                st.pause_until = now + dt + log_uniform(&mut self.rng, self.params.office_pause);
            }
        }
    }

    fn road_points(&self, from: PoiId, to: PoiId) -> Vec<Point> {
        let (a, b) = (self.map.poi(from).anchor, self.map.poi(to).anchor);
        self.vertex_points(a, b)
    }

    fn vertex_points(&self, a: usize, b: usize) -> Vec<Point> {
        // The map is validated to connect all points of interest.
        let path = shortest_path(&self.map.graph, a, b).expect("connected map");
        path.vertices
            .iter()
            .map(|&v| self.map.graph.position(v))
            .collect()
    }

    fn choose_bus(&self, from: PoiId, to: PoiId) -> Option<(LineId, usize, usize)> {
        let (p, q) = (self.map.poi_position(from), self.map.poi_position(to));
        let r = self.params.bus_stop_radius;
        self.lines.iter().find_map(|line| {
            let board = line.nearest_stop(p, r)?;
            let alight = line.nearest_stop(q, r)?;
            (board != alight).then_some((line.id, board, alight))
        })
    }

    fn begin_trip(&mut self, node: usize, from: PoiId, to: PoiId, activity: Activity) {
        let owns_car = self.profiles[node].owns_car;
        let walk = uniform(&mut self.rng, self.params.walk_speed);
        let mut legs = VecDeque::new();
        let origin = self.map.poi_position(from);
        if self.states[node].position != origin {
            legs.push_back(Leg::Move {
                waypoints: vec![origin],
                next: 0,
                speed: walk,
            });
        }
        let transport = if owns_car {
            let speed = uniform(&mut self.rng, self.params.vehicle_speed);
            legs.push_back(Leg::Move {
                waypoints: self.road_points(from, to),
                next: 0,
                speed,
            });
            Transport::Car
        } else if let Some((line, board, alight)) = self.choose_bus(from, to) {
            let l = &self.lines[line];
            let board_v = self.map.poi(l.stops[board]).anchor;
            let alight_v = self.map.poi(l.stops[alight]).anchor;
            legs.push_back(Leg::Move {
                waypoints: self.vertex_points(self.map.poi(from).anchor, board_v),
                next: 0,
                speed: walk,
            });
            legs.push_back(Leg::WaitBus {
                line,
                board,
                alight,
            });
            legs.push_back(Leg::Move {
                waypoints: self.vertex_points(alight_v, self.map.poi(to).anchor),
                next: 0,
                speed: walk,
            });
            Transport::Bus(line)
        } else {
            legs.push_back(Leg::Move {
                waypoints: self.road_points(from, to),
                next: 0,
                speed: walk,
            });
            Transport::Walk
        };
        let st = &mut self.states[node];
        st.legs = legs;
        st.transport = transport;
        st.activity = activity;
    }

    fn advance_trip(&mut self, node: usize, now: f64, dt: f64) {
        let mut left = dt;
        loop {
            let st = &mut self.states[node];
            let Some(leg) = st.legs.front_mut() else {
                self.arrive(node, now + dt);
                return;
            };
            match leg {
                Leg::Move {
                    waypoints,
                    next,
                    speed,
                } => {
                    let (p, n, rest) = move_along(st.position, waypoints, *next, *speed, left);
                    st.position = p;
                    *next = n;
                    if n < waypoints.len() {
                        return;
                    }
                    st.legs.pop_front();
                    left = rest;
                    if left <= 0.0 && !st.legs.is_empty() {
                        return;
                    }
                }
                Leg::WaitBus {
                    line,
                    board,
                    alight,
                } => {
                    let (line, board, alight) = (*line, *board, *alight);
                    let bus = self
                        .buses
                        .iter()
                        .position(|b| b.line == line && b.dwelling_at() == Some(board));
                    if let Some(bus) = bus {
                        st.legs[0] = Leg::Ride { bus, alight };
                        st.position = self.buses[bus].position;
                    }
                    return;
                }
                Leg::Ride { bus, alight } => {
                    let b = &self.buses[*bus];
                    st.position = b.position;
                    if b.dwelling_at() == Some(*alight) {
                        st.legs.pop_front();
                    }
                    return;
                }
            }
        }
    }

    fn arrive(&mut self, node: usize, at: f64) {
        let st = &mut self.states[node];
        st.activity = st.activity.arrival();
        match st.activity {
            Activity::AtOffice => {
                let plan = st.plan.expect("plan active");
                st.work_until = at + plan.work_duration;
                st.pause_until = at + log_uniform(&mut self.rng, self.params.office_pause);
                st.office_move = None;
            }
            Activity::AtEveningSpot => {
                let plan = st.plan.expect("plan active");
                if let Some(g) = plan.evening.and_then(|e| e.group) {
                    if let Some(group) = self.groups.get_mut(&plan.day).map(|gs| &mut gs[g]) {
                        group.arrived += 1;
                        if group.arrived == group.members.len() {
                            group.started_at = Some(at);
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

/// Checks that every point of interest is reachable from every other.
fn check_poi_connectivity(map: &MapContext) -> Result<()> {
    let comp = map.graph.components();
    if let Some(first) = map.pois.first() {
        let c = comp[first.anchor];
        if let Some(p) = map.pois.iter().find(|p| comp[p.anchor] != c) {
            return Err(SimError::InvalidMap(format!(
                "point of interest {} is disconnected from point of interest {}",
                p.id, first.id
            )));
        }
    }
    Ok(())
}
