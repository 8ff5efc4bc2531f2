use crate::geometry::{Point, Rect};

/// Uniform grid of square cells for fixed-radius neighbor queries.
///
/// Entries are kept sorted by cell index, so memory and rebuild cost scale
/// with the number of entries rather than the number of cells. Rebuild
/// whenever positions change.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    /// `(cell, id, position)`, sorted by cell then insertion order.
    items: Vec<(usize, u32, Point)>,
}

impl SpatialGrid {
    pub fn new(bounds: Rect, cell: f64) -> Self {
        let nx = ((bounds.width() / cell).floor() as usize + 1).max(1);
        let ny = ((bounds.height() / cell).floor() as usize + 1).max(1);
        SpatialGrid {
            origin: bounds.min,
            cell,
            nx,
            ny,
            items: Vec::new(),
        }
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let cx = ((p.x - self.origin.x) / self.cell).floor().max(0.0) as usize;
        let cy = ((p.y - self.origin.y) / self.cell).floor().max(0.0) as usize;
        (cx.min(self.nx - 1), cy.min(self.ny - 1))
    }

    /// Replaces the indexed set with `(id, position)` pairs.
    pub fn rebuild(&mut self, entries: impl IntoIterator<Item = (u32, Point)>) {
        let mut items = std::mem::take(&mut self.items);
        items.clear();
        items.extend(entries.into_iter().map(|(id, p)| {
            let (cx, cy) = self.cell_of(p);
            (cy * self.nx + cx, id, p)
        }));
        items.sort_by_key(|e| e.0);
        self.items = items;
    }

    /// Calls `f(id, distance)` for every indexed entry within `radius` of `p`.
    /// Entries are visited cell by cell; callers needing an order must sort.
    pub fn for_each_within(&self, p: Point, radius: f64, mut f: impl FnMut(u32, f64)) {
        if self.items.is_empty() {
            return;
        }
        let reach = (radius / self.cell).ceil() as usize;
        let (cx, cy) = self.cell_of(p);
        let (x0, x1) = (cx.saturating_sub(reach), (cx + reach).min(self.nx - 1));
        for y in cy.saturating_sub(reach)..=(cy + reach).min(self.ny - 1) {
            let (lo, hi) = (y * self.nx + x0, y * self.nx + x1);
            let s = self.items.partition_point(|e| e.0 < lo);
            for &(c, id, q) in &self.items[s..] {
                if c > hi {
                    break;
                }
                let d = p.distance(q);
                if d <= radius {
                    f(id, d);
                }
            }
        }
    }

    /// Sorted ids within `radius` of `p`.
    pub fn within(&self, p: Point, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_within(p, radius, |id, _| out.push(id));
        out.sort_unstable();
        out
    }
}
