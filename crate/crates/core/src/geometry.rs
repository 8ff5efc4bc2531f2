use serde::{Deserialize, Serialize};

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point `d` meters from `self` towards `target` (clamped at `target`).
    pub fn towards(self, target: Point, d: f64) -> Point {
        let len = self.distance(target);
        if len <= d || len == 0.0 {
            return target;
        }
        let f = d / len;
        Point::new(self.x + (target.x - self.x) * f, self.y + (target.y - self.y) * f)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Rect {
            min: Point::new(min_x, min_y),
            max: Point::new(max_x, max_y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersection(&self, other: &Rect) -> Rect {
        Rect::new(
            self.min.x.max(other.min.x),
            self.min.y.max(other.min.y),
            self.max.x.min(other.max.x),
            self.max.y.min(other.max.y),
        )
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    /// Square of side `side` centered on `center`, clipped to `self`.
    pub fn square_within(&self, center: Point, side: f64) -> Rect {
        let h = side / 2.0;
        Rect::new(center.x - h, center.y - h, center.x + h, center.y + h).intersection(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn towards_stops_at_target() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(3.0, 4.0);
        assert_eq!(a.towards(b, 2.5), Point::new(1.5, 2.0));
        assert_eq!(a.towards(b, 10.0), b);
        assert_eq!(b.towards(b, 1.0), b);
    }

    #[test]
    fn square_is_clipped_to_bounds() {
        let r = Rect::new(0.0, 0.0, 100.0, 100.0);
        let s = r.square_within(Point::new(95.0, 50.0), 20.0);
        assert_eq!(s, Rect::new(85.0, 40.0, 100.0, 60.0));
        assert_eq!(s.area(), 300.0);
        assert_eq!(Rect::new(0.0, 0.0, 1.0, 1.0).intersection(&Rect::new(2.0, 2.0, 3.0, 3.0)).area(), 0.0);
    }

    proptest! {
        #[test]
        fn step_covers_requested_distance(
            ax in -1e3..1e3f64, ay in -1e3..1e3f64, bx in -1e3..1e3f64, by in -1e3..1e3f64, d in 0.0..2e3f64,
        ) {
            let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
            let p = a.towards(b, d);
            let moved = a.distance(p);
            prop_assert!((moved - d.min(a.distance(b))).abs() < 1e-6);
            prop_assert!(p.distance(b) <= a.distance(b) + 1e-9);
        }

        #[test]
        fn clamped_points_are_inside(x in -500.0..500.0f64, y in -500.0..500.0f64) {
            let r = Rect::new(-100.0, -50.0, 100.0, 50.0);
            prop_assert!(r.contains(r.clamp(Point::new(x, y))));
        }
    }
}
