use rand::Rng;

use super::{uniform, MobilityParams};
use crate::error::{Result, SimError};
use crate::geometry::Point;
use crate::map::{shortest_path, MapContext, PoiId, PoiKind, Segment};

pub type LineId = usize;

/// A cyclic bus route through the bus stops of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BusLine {
    pub id: LineId,
    pub segment: Segment,
    pub stops: Vec<PoiId>,
    /// Route polyline; the first point is stop 0 and the loop closes back on it.
    points: Vec<Point>,
    /// Cumulative distance at each polyline point.
    cumulative: Vec<f64>,
    /// Distance along the loop of each stop.
    stop_offsets: Vec<f64>,
    length: f64,
}

impl BusLine {
    pub fn stop_count(&self) -> usize {
        self.stops.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn stop_position(&self, stop: usize) -> Point {
        self.position_at(self.stop_offsets[stop])
    }

    /// Distance from stop `i` to the next stop along the loop.
    pub fn leg_length(&self, i: usize) -> f64 {
        match self.stop_offsets.get(i + 1) {
            Some(next) => next - self.stop_offsets[i],
            None => self.length - self.stop_offsets[i],
        }
    }

    pub fn position_at(&self, offset: f64) -> Point {
        if self.length == 0.0 {
            return self.points[0];
        }
        let s = offset.rem_euclid(self.length);
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => return self.points[i],
            Err(i) => i.max(1) - 1,
        };
        let (a, b) = (self.points[i], self.points[i + 1]);
        a.towards(b, s - self.cumulative[i])
    }

    /// Stop of this line nearest to `p` within `radius`; ties go to the lower index.
    pub fn nearest_stop(&self, p: Point, radius: f64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..self.stops.len() {
            let d = self.stop_position(i).distance(p);
            if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }
}

/// One line per segment with at least two distinct stop vertices. Stops are
/// visited in angular order around their centroid.
pub fn build_bus_lines(map: &MapContext) -> Result<Vec<BusLine>> {
    let mut lines = Vec::new();
    for segment in Segment::ALL {
        let mut stops: Vec<PoiId> = map
            .pois
            .iter()
            .filter(|p| p.kind == PoiKind::BusStop && p.segment == segment)
            .map(|p| p.id)
            .collect();
        let mut anchors: Vec<_> = stops.iter().map(|&s| map.pois[s].anchor).collect();
        anchors.sort_unstable();
        anchors.dedup();
        if anchors.len() < 2 {
            continue;
        }
        let n = stops.len() as f64;
        let cx = stops.iter().map(|&s| map.poi_position(s).x).sum::<f64>() / n;
        let cy = stops.iter().map(|&s| map.poi_position(s).y).sum::<f64>() / n;
        stops.sort_by(|&a, &b| {
            let pa = map.poi_position(a);
            let pb = map.poi_position(b);
            (pa.y - cy)
                .atan2(pa.x - cx)
                .total_cmp(&(pb.y - cy).atan2(pb.x - cx))
                .then(a.cmp(&b))
        });

        let mut points = vec![map.poi_position(stops[0])];
        let mut cumulative = vec![0.0];
        let mut stop_offsets = Vec::with_capacity(stops.len());
        for i in 0..stops.len() {
            stop_offsets.push(*cumulative.last().expect("nonempty"));
            let from = map.pois[stops[i]].anchor;
            let to = map.pois[stops[(i + 1) % stops.len()]].anchor;
            let path = shortest_path(&map.graph, from, to)
                .ok_or_else(|| {
                    SimError::InvalidMap(format!("bus stops at {from} and {to} are disconnected"))
                })?;
            for &v in &path.vertices[1..] {
                let p = map.graph.position(v);
                let last = *points.last().expect("nonempty");
                cumulative.push(cumulative.last().expect("nonempty") + last.distance(p));
                points.push(p);
            }
        }
        let length = *cumulative.last().expect("nonempty");
        lines.push(BusLine {
            id: lines.len(),
            segment,
            stops,
            points,
            cumulative,
            stop_offsets,
            length,
        });
    }
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusPhase {
    Dwelling { stop: usize, until: f64 },
    Driving { from: usize, progress: f64, speed: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusVehicle {
    pub line: LineId,
    pub phase: BusPhase,
    pub position: Point,
}

impl BusVehicle {
    pub fn new(line: &BusLine, stop: usize) -> Self {
        BusVehicle {
            line: line.id,
            phase: BusPhase::Dwelling { stop, until: 0.0 },
            position: line.stop_position(stop),
        }
    }

    pub fn dwelling_at(&self) -> Option<usize> {
        match self.phase {
            BusPhase::Dwelling { stop, .. } => Some(stop),
            BusPhase::Driving { .. } => None,
        }
    }

    /// Advances the bus over `[now, now + dt)`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        line: &BusLine,
        params: &MobilityParams,
        now: f64,
        dt: f64,
        rng: &mut R,
    ) {
        match self.phase {
            BusPhase::Dwelling { stop, until } => {
                if now >= until {
                    let speed = uniform(rng, params.vehicle_speed);
                    self.phase = BusPhase::Driving {
                        from: stop,
                        progress: 0.0,
                        speed,
                    };
                    self.drive(line, params, now, dt, rng);
                }
            }
            BusPhase::Driving { .. } => self.drive(line, params, now, dt, rng),
        }
    }

    fn drive<R: Rng + ?Sized>(
        &mut self,
        line: &BusLine,
        params: &MobilityParams,
        now: f64,
        dt: f64,
        rng: &mut R,
    ) {
        let BusPhase::Driving {
            from,
            progress,
            speed,
        } = self.phase
        else {
            return;
        };
        let leg = line.leg_length(from);
        let progress = progress + speed * dt;
        if progress >= leg - 1e-9 {
            let stop = (from + 1) % line.stop_count();
            self.phase = BusPhase::Dwelling {
                stop,
                until: now + dt + uniform(rng, params.bus_wait),
            };
            self.position = line.stop_position(stop);
        } else {
            self.phase = BusPhase::Driving {
                from,
                progress,
                speed,
            };
            self.position = line.position_at(line.stop_offsets[from] + progress);
        }
    }
}
