use serde::{Deserialize, Serialize};

use super::buildings::BuildingFootprint;
use super::StreetSegment;
use crate::streetgraph::geometry::Point;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideStatus {
    Both,
    LeftOnly,
    RightOnly,
    None,
}

impl SideStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SideStatus::Both => "both",
            SideStatus::LeftOnly => "left_only",
            SideStatus::RightOnly => "right_only",
            SideStatus::None => "none",
        }
    }
}

/// Closest building wall met by a perpendicular ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub distance: f64,
    pub height: f64,
    pub building: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnclosureResult {
    pub left: Option<Hit>,
    pub right: Option<Hit>,
    pub side_status: SideStatus,
    /// Mean of the two wall heights; only when both sides are enclosed.
    pub h_mean: Option<f64>,
    /// `w_L + w_R`; only when both sides are enclosed.
    pub width: Option<f64>,
    pub enc: Option<f64>,
}

/// Distance along `origin + t·dir` (unit `dir`) to segment `a–b`, if hit with `t > 0`.
fn ray_hit(origin: Point, dir: Point, a: Point, b: Point) -> Option<f64> {
    let e = b.sub(a);
    let denom = dir.cross(e);
    if denom == 0.0 {
        return None;
    }
    let w = a.sub(origin);
    let t = w.cross(e) / denom;
    let s = w.cross(dir) / denom;
    (t > 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

fn cast(origin: Point, dir: Point, buildings: &[BuildingFootprint], max_radius: f64) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, b) in buildings.iter().enumerate() {
        for (p, q) in b.edges() {
            if let Some(t) = ray_hit(origin, dir, p, q) {
                if t <= max_radius && best.is_none_or(|h| t < h.distance) {
                    best = Some(Hit {
                        distance: t,
                        height: b.height,
                        building: i,
                    });
                }
            }
        }
    }
    best
}

/// Casts the perpendicular through the segment centre up to `max_radius` on
/// each side and combines the nearest walls into `enc = h̄ / w`. Left is to
/// the left of the direction of travel along the segment.
pub fn street_profile(
    segment: &StreetSegment,
    buildings: &[BuildingFootprint],
    max_radius: f64,
) -> Result<EnclosureResult> {
    if !(max_radius.is_finite() && max_radius > 0.0) {
        return Err(Error::invalid(format!("max_radius must be positive, got {max_radius}")));
    }
    let t = segment.tangent();
    let left_dir = Point::new(-t.y, t.x);
    let right_dir = left_dir.scale(-1.0);
    let left = cast(segment.center, left_dir, buildings, max_radius);
    let right = cast(segment.center, right_dir, buildings, max_radius);
    let side_status = match (left.is_some(), right.is_some()) {
        (true, true) => SideStatus::Both,
        (true, false) => SideStatus::LeftOnly,
        (false, true) => SideStatus::RightOnly,
        (false, false) => SideStatus::None,
    };
    let (h_mean, width, enc) = match (left, right) {
        (Some(l), Some(r)) => {
            let h = (l.height + r.height) / 2.0;
            let w = l.distance + r.distance;
            (Some(h), Some(w), Some(h / w))
        }
        _ => (None, None, None),
    };
    Ok(EnclosureResult {
        left,
        right,
        side_status,
        h_mean,
        width,
        enc,
    })
}

pub fn enclosure_for_segments(
    segments: &[StreetSegment],
    buildings: &[BuildingFootprint],
    max_radius: f64,
) -> Result<Vec<EnclosureResult>> {
    use rayon::prelude::*;
    segments
        .par_iter()
        .map(|s| street_profile(s, buildings, max_radius))
        .collect()
}

/// `segment_id,x,y,azimuth,h_mean,width,enc,side_status`; undefined values are empty.
pub fn write_enclosure_csv<W: std::io::Write>(
    segments: &[StreetSegment],
    results: &[EnclosureResult],
    writer: W,
) -> Result<()> {
    if segments.len() != results.len() {
        return Err(Error::shape(format!("{} results", segments.len()), results.len()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["segment_id", "x", "y", "azimuth", "h_mean", "width", "enc", "side_status"])?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for (s, r) in segments.iter().zip(results) {
        w.write_record([
            s.id(),
            s.center.x.to_string(),
            s.center.y.to_string(),
            s.azimuth.to_string(),
            opt(r.h_mean),
            opt(r.width),
            opt(r.enc),
            r.side_status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
