//! Planar helpers shared by the graph and street-geometry code.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
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

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

pub fn arc_length(polyline: &[Point]) -> f64 {
    polyline.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Point at arc length `s` from the start (clamped to the polyline) and the
/// index of the segment it lies on.
pub fn point_at_arc(polyline: &[Point], s: f64) -> (Point, usize) {
    let mut walked = 0.0;
    for (i, w) in polyline.windows(2).enumerate() {
        let len = w[0].distance(w[1]);
        if walked + len >= s && len > 0.0 {
            let t = ((s - walked) / len).clamp(0.0, 1.0);
            return (w[0].lerp(w[1], t), i);
        }
        walked += len;
    }
    let last = polyline.len().saturating_sub(1);
    (polyline[last], last.saturating_sub(1))
}

/// Sub-polyline between arc lengths `from` and `to`.
pub fn slice_by_arc(polyline: &[Point], from: f64, to: f64) -> Vec<Point> {
    let (start, i) = point_at_arc(polyline, from);
    let (end, j) = point_at_arc(polyline, to);
    let mut out = vec![start];
    out.extend_from_slice(&polyline[i + 1..=j]);
    out.push(end);
    out.dedup();
    if out.len() == 1 {
        out.push(end);
    }
    out
}

/// Which side of a box a clipped segment end lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Liang–Barsky clip of `p0→p1` against `[xmin,xmax]×[ymin,ymax]`.
///
/// Returns the parameter interval kept and, for each end that was cut, the
/// box side it was cut on.
pub fn clip_segment(
    p0: Point,
    p1: Point,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
) -> Option<(f64, f64, Option<Side>, Option<Side>)> {
    let d = p1.sub(p0);
    let checks = [
        (-d.x, p0.x - xmin, Side::Left),
        (d.x, xmax - p0.x, Side::Right),
        (-d.y, p0.y - ymin, Side::Bottom),
        (d.y, ymax - p0.y, Side::Top),
    ];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let (mut s0, mut s1) = (None, None);
    for (p, q, side) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
            continue;
        }
        let r = q / p;
        if p < 0.0 {
            if r > t1 {
                return None;
            }
            if r > t0 {
                t0 = r;
                s0 = Some(side);
            }
        } else {
            if r < t0 {
                return None;
            }
            if r < t1 {
                t1 = r;
                s1 = Some(side);
            }
        }
    }
    Some((t0, t1, s0, s1))
}

/// Point of a clipped segment, snapped exactly onto the box side it was cut on.
pub fn snap_to_side(p: Point, side: Option<Side>, xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Point {
    let mut q = Point::new(p.x.clamp(xmin, xmax), p.y.clamp(ymin, ymax));
    match side {
        Some(Side::Left) => q.x = xmin,
        Some(Side::Right) => q.x = xmax,
        Some(Side::Bottom) => q.y = ymin,
        Some(Side::Top) => q.y = ymax,
        None => q = p,
    }
    q
}
