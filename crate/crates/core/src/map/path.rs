use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::graph::{RoadGraph, VertexId};

/// A route over the road graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub vertices: Vec<VertexId>,
    pub length: f64,
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    dist: f64,
    vertex: VertexId,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distances from every vertex to `target`.
pub fn distances_to(graph: &RoadGraph, target: VertexId) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.vertex_count()];
    let mut heap = BinaryHeap::new();
    dist[target] = 0.0;
    heap.push(State {
        dist: 0.0,
        vertex: target,
    });
    while let Some(State { dist: d, vertex: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(State { dist: nd, vertex: v });
            }
        }
    }
    dist
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Minimum-length path from `from` to `to`; `None` when unreachable.
///
/// Among equal-length paths the lexicographically smallest vertex sequence
/// wins: after a reverse Dijkstra from `to`, the walk from `from` always
/// steps to the smallest-id neighbor that stays on a shortest path.
pub fn shortest_path(graph: &RoadGraph, from: VertexId, to: VertexId) -> Option<Path> {
    let dist = distances_to(graph, to);
    if !dist[from].is_finite() {
        return None;
    }
    let mut vertices = vec![from];
    let mut u = from;
    while u != to {
        // Adjacency lists are sorted by vertex id.
        let next = graph
            .neighbors(u)
            .iter()
            .find(|&&(v, w)| dist[v].is_finite() && same_length(dist[u], w + dist[v]))
            .map(|&(v, _)| v)?;
        vertices.push(next);
        u = next;
    }
    Some(Path {
        vertices,
        length: dist[from],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    /// A-B 3 m, B-C 4 m, and an A-C road of 10 m bent through a fourth vertex D
    /// (edge lengths are Euclidean, so the 10 m road cannot be a straight edge).
    fn abc() -> RoadGraph {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(3.0, 0.0);
        let c = Point::new(3.0, 4.0);
        // |AD| = |DC| = 5: midpoint of AC pushed out along the perpendicular.
        let t = (25.0_f64 - 6.25).sqrt();
        let d = Point::new(1.5 - 0.8 * t, 2.0 + 0.6 * t);
        RoadGraph::from_parts(vec![a, b, c, d], &[(0, 1), (1, 2), (0, 3), (3, 2)]).unwrap()
    }

    /// Exhaustive simple-path enumeration used as the oracle.
    fn all_simple_paths(g: &RoadGraph, from: usize, to: usize) -> Vec<(Vec<usize>, f64)> {
        fn go(
            g: &RoadGraph,
            u: usize,
            to: usize,
            path: &mut Vec<usize>,
            len: f64,
            out: &mut Vec<(Vec<usize>, f64)>,
        ) {
            if u == to {
                out.push((path.clone(), len));
                return;
            }
            for &(v, w) in g.neighbors(u) {
                if !path.contains(&v) {
                    path.push(v);
                    go(g, v, to, path, len + w, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(g, from, to, &mut vec![from], 0.0, &mut out);
        out
    }

    #[test]
    fn three_vertex_graph_prefers_two_hops() {
        let g = abc();
        let p = shortest_path(&g, 0, 2).unwrap();
        let oracle = all_simple_paths(&g, 0, 2);
        let best = oracle
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        assert_eq!(p.vertices, best.0);
        assert_eq!(p.vertices, vec![0, 1, 2]);
        assert!((p.length - 7.0).abs() < 1e-12);
        let detour: f64 = oracle.iter().find(|o| o.0 == vec![0, 3, 2]).unwrap().1;
        assert!((detour - 10.0).abs() < 1e-9);
    }

    #[test]
    fn identity_path() {
        let g = abc();
        let p = shortest_path(&g, 1, 1).unwrap();
        assert_eq!(p.vertices, vec![1]);
        assert_eq!(p.length, 0.0);
    }

    #[test]
    fn disconnected_pair_has_no_path() {
        let g = RoadGraph::from_parts(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(5.0, 5.0)],
            &[(0, 1)],
        )
        .unwrap();
        assert_eq!(shortest_path(&g, 0, 2), None);
    }

    #[test]
    fn ties_break_lexicographically() {
        // Unit square: 0-1-3 and 0-2-3 both have length 2.
        let g = RoadGraph::from_parts(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
                Point::new(1.0, 1.0),
            ],
            &[(0, 2), (2, 3), (0, 1), (1, 3)],
        )
        .unwrap();
        assert_eq!(shortest_path(&g, 0, 3).unwrap().vertices, vec![0, 1, 3]);
        assert_eq!(shortest_path(&g, 3, 0).unwrap().vertices, vec![3, 1, 0]);
    }
}
