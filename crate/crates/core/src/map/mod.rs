//! Road network, points of interest, and spatial queries.

mod graph;
mod path;
mod poi;
mod spatial;

pub use graph::{parse_map, synth_map, Edge, RoadGraph, VertexId, SNAP_DISTANCE};
pub use path::{distances_to, shortest_path, Path};
pub use poi::{
    anchor_point, office_area_rect, place_pois, PoiCounts, PoiId, PoiKind, PointOfInterest,
    Segment, SegmentLayout, DEFAULT_OFFICE_AREA,
};
pub use spatial::SpatialGrid;

/// Immutable map bundle shared by every run of a scenario.
#[derive(Debug, Clone)]
pub struct MapContext {
    pub graph: RoadGraph,
    pub layout: SegmentLayout,
    pub pois: Vec<PointOfInterest>,
}

impl MapContext {
    /// Lays out the default segments over `graph` and places points of interest.
    pub fn build(graph: RoadGraph, counts: &PoiCounts, office_area: f64, seed: u64) -> crate::Result<Self> {
        let layout = SegmentLayout::default_for(graph.bounds());
        let pois = place_pois(&graph, &layout, counts, office_area, seed)?;
        Ok(MapContext { graph, layout, pois })
    }

    pub fn poi(&self, id: PoiId) -> &PointOfInterest {
        &self.pois[id]
    }

    pub fn poi_position(&self, id: PoiId) -> crate::geometry::Point {
        self.graph.position(self.pois[id].anchor)
    }
}
