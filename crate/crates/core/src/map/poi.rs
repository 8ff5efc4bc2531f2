//! Points of interest and the segment layout nodes are grouped by.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{RoadGraph, VertexId};
use crate::error::{Result, SimError};
use crate::geometry::{Point, Rect};

/// Default office floor area in m².
pub const DEFAULT_OFFICE_AREA: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PoiKind {
    House,
    Office,
    EveningSpot,
    BusStop,
}

impl PoiKind {
    pub const ALL: [PoiKind; 4] = [
        PoiKind::House,
        PoiKind::Office,
        PoiKind::EveningSpot,
        PoiKind::BusStop,
    ];
}

impl std::fmt::Display for PoiKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PoiKind::House => "house",
            PoiKind::Office => "office",
            PoiKind::EveningSpot => "evening spot",
            PoiKind::BusStop => "bus stop",
        };
        f.write_str(s)
    }
}

/// One of the three primary map segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Segment {
    A,
    B,
    C,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::A, Segment::B, Segment::C];
}

impl std::fmt::Display for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

pub type PoiId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointOfInterest {
    pub id: PoiId,
    pub kind: PoiKind,
    pub anchor: VertexId,
    /// Side of the square activity area; 0 for point locations.
    pub extent: f64,
    pub segment: Segment,
}

/// Three vertical strips laid out B | A | C, so that A overlaps both
/// neighbours: D = A ∩ B and E = A ∩ C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentLayout {
    pub a: Rect,
    pub b: Rect,
    pub c: Rect,
}

impl SegmentLayout {
    /// Equal strips with overlap bands of `overlap` × strip width.
    pub fn strips(bounds: Rect, overlap: f64) -> Self {
        let s = bounds.width() / 3.0;
        let half = overlap * s / 2.0;
        let (x0, x3) = (bounds.min.x, bounds.max.x);
        let (y0, y1) = (bounds.min.y, bounds.max.y);
        SegmentLayout {
            b: Rect::new(x0, y0, x0 + s + half, y1),
            a: Rect::new(x0 + s - half, y0, x0 + 2.0 * s + half, y1),
            c: Rect::new(x0 + 2.0 * s - half, y0, x3, y1),
        }
    }

    /// Default layout: 20% overlap bands.
    pub fn default_for(bounds: Rect) -> Self {
        Self::strips(bounds, 0.2)
    }

    pub fn rect(&self, seg: Segment) -> Rect {
        match seg {
            Segment::A => self.a,
            Segment::B => self.b,
            Segment::C => self.c,
        }
    }

    pub fn overlap_d(&self) -> Rect {
        self.a.intersection(&self.b)
    }

    pub fn overlap_e(&self) -> Rect {
        self.a.intersection(&self.c)
    }
}

/// Requested number of points of interest per kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoiCounts {
    pub houses: usize,
    pub offices: usize,
    pub evening_spots: usize,
    pub bus_stops: usize,
}

impl PoiCounts {
    pub fn get(&self, kind: PoiKind) -> usize {
        match kind {
            PoiKind::House => self.houses,
            PoiKind::Office => self.offices,
            PoiKind::EveningSpot => self.evening_spots,
            PoiKind::BusStop => self.bus_stops,
        }
    }

    pub fn total(&self) -> usize {
        PoiKind::ALL.iter().map(|&k| self.get(k)).sum()
    }
}

/// Places points of interest on graph vertices.
///
/// The k-th POI of each kind goes to segment A, B, C in rotation, anchored on
/// a random vertex inside that segment. Bus stops avoid reusing a vertex
/// while unused candidates remain so that every line has distinct stops.
pub fn place_pois(
    graph: &RoadGraph,
    layout: &SegmentLayout,
    counts: &PoiCounts,
    office_area: f64,
    seed: u64,
) -> Result<Vec<PointOfInterest>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<Vec<VertexId>> = Segment::ALL
        .iter()
        .map(|&s| {
            let r = layout.rect(s);
            (0..graph.vertex_count())
                .filter(|&v| r.contains(graph.position(v)))
                .collect()
        })
        .collect();

    let mut pois = Vec::with_capacity(counts.total());
    for kind in PoiKind::ALL {
        let n = counts.get(kind);
        let mut pools: Vec<Vec<VertexId>> = Vec::new();
        for k in 0..n {
            let si = k % 3;
            let segment = Segment::ALL[si];
            let cand = &candidates[si];
            if cand.is_empty() {
                return Err(SimError::EmptySegment {
                    segment: segment.to_string(),
                    kind: kind.to_string(),
                });
            }
            let anchor = if kind == PoiKind::BusStop {
                if pools.is_empty() {
                    pools = candidates.clone();
                }
                if pools[si].is_empty() {
                    pools[si] = cand.clone();
                }
                let i = rand::Rng::gen_range(&mut rng, 0..pools[si].len());
                pools[si].swap_remove(i)
            } else {
                *cand.choose(&mut rng).expect("nonempty")
            };
            let extent = if kind == PoiKind::Office {
                office_area.sqrt()
            } else {
                0.0
            };
            pois.push(PointOfInterest {
                id: pois.len(),
                kind,
                anchor,
                extent,
                segment,
            });
        }
    }
    Ok(pois)
}

/// Activity area of an office, clipped to the map bounds.
pub fn office_area_rect(graph: &RoadGraph, poi: &PointOfInterest) -> Rect {
    graph
        .bounds()
        .square_within(graph.position(poi.anchor), poi.extent)
}

pub fn anchor_point(graph: &RoadGraph, poi: &PointOfInterest) -> Point {
    graph.position(poi.anchor)
}
