use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::streetgraph::geometry::Point;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingDoc {
    pub polygon: Vec<[f64; 2]>,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingsDocument {
    pub buildings: Vec<BuildingDoc>,
}

/// Outer ring (open, no repeated closing vertex) and height in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildingFootprint {
    pub ring: Vec<Point>,
    pub height: f64,
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o = |p: Point, q: Point, r: Point| q.sub(p).cross(r.sub(p));
    let (d1, d2, d3, d4) = (o(c, d, a), o(c, d, b), o(a, b, c), o(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| {
        o(p, q, r) == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}

impl BuildingFootprint {
    pub fn new(ring: Vec<Point>, height: f64) -> Result<Self> {
        if !(height.is_finite() && height > 0.0) {
            return Err(Error::invalid(format!("building height must be positive, got {height}")));
        }
        let mut ring = ring;
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        ring.dedup();
        if ring.len() < 3 {
            return Err(Error::invalid("building polygon needs at least 3 distinct vertices"));
        }
        if ring.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::invalid("building polygon has a non-finite vertex"));
        }
        let n = ring.len();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if !adjacent && segments_cross(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                    return Err(Error::invalid("building polygon is self-intersecting"));
                }
            }
        }
        Ok(BuildingFootprint { ring, height })
    }

    /// Axis-aligned rectangle centred on `center`, rotated by `angle` radians.
    pub fn rectangle(center: Point, half_w: f64, half_h: f64, angle: f64, height: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let ring = [(-half_w, -half_h), (half_w, -half_h), (half_w, half_h), (-half_w, half_h)]
            .iter()
            .map(|&(x, y)| Point::new(center.x + c * x - s * y, center.y + s * x + c * y))
            .collect();
        BuildingFootprint::new(ring, height)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.ring.len();
        (0..n).map(move |i| (self.ring[i], self.ring[(i + 1) % n]))
    }
}

pub fn buildings_from_document(doc: &BuildingsDocument) -> Result<Vec<BuildingFootprint>> {
    doc.buildings
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let ring = b.polygon.iter().map(|c| Point::new(c[0], c[1])).collect();
            BuildingFootprint::new(ring, b.height).map_err(|e| Error::invalid(format!("building {i}: {e}")))
        })
        .collect()
}

pub fn load_buildings(path: &Path) -> Result<Vec<BuildingFootprint>> {
    let doc: BuildingsDocument = crate::io::read_json(path)?;
    buildings_from_document(&doc)
}
