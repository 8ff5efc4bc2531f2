//! Road network: vertices with planar coordinates and undirected weighted edges.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::geometry::{Point, Rect};

/// Vertices closer than this are merged when parsing a map file.
pub const SNAP_DISTANCE: f64 = 1e-3;

pub type VertexId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: VertexId,
    pub b: VertexId,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadGraph {
    vertices: Vec<Point>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(VertexId, f64)>>,
    bounds: Rect,
}

impl RoadGraph {
    /// Builds a graph from vertex coordinates and endpoint pairs.
    /// Edge lengths are the Euclidean distances; duplicates and self loops are dropped.
    pub fn from_parts(vertices: Vec<Point>, pairs: &[(VertexId, VertexId)]) -> Result<Self> {
        if vertices.is_empty() {
            return Err(SimError::InvalidMap("graph has no vertices".into()));
        }
        let mut adjacency = vec![Vec::new(); vertices.len()];
        let mut edges = Vec::with_capacity(pairs.len());
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in pairs {
            if a >= vertices.len() || b >= vertices.len() {
                return Err(SimError::InvalidMap(format!("edge ({a}, {b}) out of range")));
            }
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                continue;
            }
            let length = vertices[a].distance(vertices[b]);
            edges.push(Edge { a, b, length });
            adjacency[a].push((b, length));
            adjacency[b].push((a, length));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(v, _)| v);
        }
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &vertices {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        // Maps in projected coordinates are usually anchored at the origin.
        let bounds = Rect::new(min_x.min(0.0), min_y.min(0.0), max_x, max_y);
        Ok(RoadGraph {
            vertices,
            edges,
            adjacency,
            bounds,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn position(&self, v: VertexId) -> Point {
        self.vertices[v]
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, f64)] {
        &self.adjacency[v]
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    /// Connected component label for every vertex (labels are dense, starting at 0).
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.vertices.len()];
        let mut next = 0;
        for start in 0..self.vertices.len() {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = next;
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// Vertex closest to `p`; ties go to the lower id.
    pub fn nearest_vertex(&self, p: Point) -> VertexId {
        let mut best = (f64::INFINITY, 0);
        for (i, v) in self.vertices.iter().enumerate() {
            let d = v.distance(p);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Serializes every edge as a two-point WKT linestring, one per line.
    pub fn to_wkt(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let (p, q) = (self.vertices[e.a], self.vertices[e.b]);
            let _ = writeln!(out, "LINESTRING ({} {}, {} {})", p.x, p.y, q.x, q.y);
        }
        out
    }
}

/// Merges coordinates that fall within [`SNAP_DISTANCE`] of an existing vertex.
struct Snapper {
    cells: HashMap<(i64, i64), Vec<VertexId>>,
    vertices: Vec<Point>,
}

impl Snapper {
    fn new() -> Self {
        Snapper {
            cells: HashMap::new(),
            vertices: Vec::new(),
        }
    }

    fn cell(p: Point) -> (i64, i64) {
        (
            (p.x / SNAP_DISTANCE).floor() as i64,
            (p.y / SNAP_DISTANCE).floor() as i64,
        )
    }

    fn insert(&mut self, p: Point) -> VertexId {
        let (cx, cy) = Self::cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    if let Some(&id) = ids
                        .iter()
                        .find(|&&id| self.vertices[id].distance(p) <= SNAP_DISTANCE)
                    {
                        return id;
                    }
                }
            }
        }
        let id = self.vertices.len();
        self.vertices.push(p);
        self.cells.entry((cx, cy)).or_default().push(id);
        id
    }
}

fn parse_linestring(line: &str, lineno: usize) -> Result<Vec<Point>> {
    let err = |reason: &str| SimError::MapParse {
        line: lineno,
        reason: reason.to_string(),
    };
    let rest = line
        .strip_prefix("LINESTRING")
        .ok_or_else(|| err("expected LINESTRING"))?
        .trim();
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| err("expected parenthesized coordinate list"))?;
    let mut points = Vec::new();
    for pair in inner.split(',') {
        let mut it = pair.split_whitespace();
        let (Some(x), Some(y), None) = (it.next(), it.next(), it.next()) else {
            return Err(err(&format!("bad coordinate pair '{}'", pair.trim())));
        };
        let x: f64 = x.parse().map_err(|_| err(&format!("bad number '{x}'")))?;
        let y: f64 = y.parse().map_err(|_| err(&format!("bad number '{y}'")))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(err("non-finite coordinate"));
        }
        points.push(Point::new(x, y));
    }
    if points.len() < 2 {
        return Err(err("linestring needs at least two points"));
    }
    Ok(points)
}

/// Parses a WKT map: one `LINESTRING (x y, x y, ...)` per line.
///
/// Consecutive coordinates become edges. Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_map(text: &str) -> Result<RoadGraph> {
    let mut snapper = Snapper::new();
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let points = parse_linestring(line, i + 1)?;
        let ids: Vec<_> = points.into_iter().map(|p| snapper.insert(p)).collect();
        pairs.extend(ids.windows(2).map(|w| (w[0], w[1])));
    }
    if snapper.vertices.is_empty() {
        return Err(SimError::EmptyMap);
    }
    RoadGraph::from_parts(snapper.vertices, &pairs)
}

/// Fraction of non-spanning-tree grid edges that survive in a synthetic map.
const SYNTH_KEEP_PROBABILITY: f64 = 0.8;

/// Grid street network with random edge deletions that never disconnect it.
pub fn synth_map(width: f64, height: f64, grid_step: f64, seed: u64) -> Result<RoadGraph> {
    if !(width > 0.0 && height > 0.0 && grid_step > 0.0) {
        return Err(SimError::InvalidMap(format!(
            "width, height and grid_step must be positive (got {width}, {height}, {grid_step})"
        )));
    }
    let nx = (width / grid_step + 1e-9).floor() as usize + 1;
    let ny = (height / grid_step + 1e-9).floor() as usize + 1;
    if nx * ny < 2 {
        return Err(SimError::InvalidMap(format!(
            "grid step {grid_step} yields fewer than two vertices"
        )));
    }
    let idx = |i: usize, j: usize| j * nx + i;
    let vertices: Vec<Point> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| Point::new(i as f64 * grid_step, j as f64 * grid_step)))
        .collect();
    let mut grid_edges = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                grid_edges.push((idx(i, j), idx(i + 1, j)));
            }
            if j + 1 < ny {
                grid_edges.push((idx(i, j), idx(i, j + 1)));
            }
        }
    }

    // Random spanning tree (Kruskal over shuffled edges) keeps the map connected.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid_edges.shuffle(&mut rng);
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut kept = Vec::with_capacity(grid_edges.len());
    let mut extra = Vec::new();
    for &(a, b) in &grid_edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            kept.push((a, b));
        } else {
            extra.push((a, b));
        }
    }
    for e in extra {
        if rng.gen_bool(SYNTH_KEEP_PROBABILITY) {
            kept.push(e);
        }
    }
    kept.sort_unstable();
    RoadGraph::from_parts(vertices, &kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_segment_is_a_3_4_5_triangle() {
        let g = parse_map("LINESTRING (0 0, 3 4)").unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert!((g.edges()[0].length - 5.0).abs() < 1e-12);
    }

    #[test]
    fn shared_endpoint_is_merged() {
        let g = parse_map("LINESTRING (0 0, 3 4)\nLINESTRING (3.0004 4, 6 8)\n").unwrap();
        // Oracle: distinct coordinates after snapping at 1e-3 m.
        let coords = [(0.0, 0.0), (3.0, 4.0), (3.0004, 4.0), (6.0, 8.0)];
        let mut distinct: Vec<(f64, f64)> = Vec::new();
        for c in coords {
            if !distinct
                .iter()
                .any(|d| ((d.0 - c.0).powi(2) + (d.1 - c.1).powi(2)).sqrt() <= 1e-3)
            {
                distinct.push(c);
            }
        }
        assert_eq!(g.vertex_count(), distinct.len());
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn degenerate_linestring_is_rejected() {
        let err = parse_map("LINESTRING (0 0)").unwrap_err();
        assert!(matches!(err, SimError::MapParse { line: 1, .. }));
    }

    #[test]
    fn malformed_record_reports_line() {
        let err = parse_map("LINESTRING (0 0, 1 1)\n\nPOINT (1 2)").unwrap_err();
        assert_eq!(
            err,
            SimError::MapParse {
                line: 3,
                reason: "expected LINESTRING".into()
            }
        );
        assert!(matches!(
            parse_map("LINESTRING (0 0, 1 x)"),
            Err(SimError::MapParse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(parse_map(""), Err(SimError::EmptyMap));
        assert_eq!(parse_map("\n  \n# comment\n"), Err(SimError::EmptyMap));
    }

    #[test]
    fn synthetic_grid_vertex_count() {
        let g = synth_map(100.0, 100.0, 50.0, 1).unwrap();
        assert_eq!(g.vertex_count(), 9);
        assert!(g.is_connected());
        for e in g.edges() {
            assert!((e.length - 50.0).abs() < 1e-9);
        }
    }

    #[test]
    fn synthetic_city_scale_map_is_connected_and_bounded() {
        let g = synth_map(1750.0, 2125.0, 125.0, 7).unwrap();
        assert!(g.is_connected());
        let b = g.bounds();
        assert!(b.max.x <= 1750.0 && b.max.y <= 2125.0);
        assert!(g.vertices().iter().all(|&p| b.contains(p)));
        assert_eq!(g.vertex_count(), 15 * 18);
    }

    #[test]
    fn synthetic_map_is_deterministic() {
        let a = synth_map(500.0, 500.0, 50.0, 3).unwrap();
        let b = synth_map(500.0, 500.0, 50.0, 3).unwrap();
        assert_eq!(a, b);
        let c = synth_map(500.0, 500.0, 50.0, 4).unwrap();
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn synthetic_map_rejects_degenerate_parameters() {
        assert!(synth_map(10.0, 10.0, 50.0, 1).is_err());
        assert!(synth_map(0.0, 10.0, 5.0, 1).is_err());
        assert!(synth_map(10.0, 10.0, -1.0, 1).is_err());
    }

    #[test]
    fn edge_lengths_match_endpoint_distance() {
        let g = parse_map("LINESTRING (0 0, 10 0, 10 7.5, 2.25 3)").unwrap();
        for e in g.edges() {
            let d = g.position(e.a).distance(g.position(e.b));
            assert!((e.length - d).abs() <= 1e-6 * d);
        }
    }
}
