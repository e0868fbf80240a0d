//! Street segmentation and street enclosure (building height to street width)
//! from building footprints.

mod buildings;
mod profile;

use serde::{Deserialize, Serialize};

use crate::streetgraph::geometry::{arc_length, point_at_arc, slice_by_arc, Point};
use crate::{Error, Result};

pub use buildings::{buildings_from_document, load_buildings, BuildingDoc, BuildingFootprint, BuildingsDocument};
pub use profile::{
    enclosure_for_segments, street_profile, write_enclosure_csv, EnclosureResult, Hit, SideStatus,
};

pub const DEFAULT_INTERVAL: f64 = 40.0;
pub const DEFAULT_MAX_RADIUS: f64 = 50.0;

/// A piece of a street polyline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreetSegment {
    /// Index of the input polyline.
    pub source: usize,
    /// Position within its polyline.
    pub index: usize,
    pub polyline: Vec<Point>,
    /// Point at half the arc length.
    pub center: Point,
    /// Clockwise from north, folded into `[0, π)`.
    pub azimuth: f64,
    pub length: f64,
}

impl StreetSegment {
    pub fn id(&self) -> String {
        format!("{}-{}", self.source, self.index)
    }

    /// Unit direction of the polyline at its centre point.
    pub fn tangent(&self) -> Point {
        let (_, i) = point_at_arc(&self.polyline, self.length / 2.0);
        let d = self.polyline[i + 1].sub(self.polyline[i]);
        d.scale(1.0 / d.norm())
    }
}

/// Azimuth of direction `d`, clockwise from north, in `[0, π)`.
pub fn azimuth(d: Point) -> f64 {
    let a = d.x.atan2(d.y).rem_euclid(std::f64::consts::PI);
    // rem_euclid can round up to π itself
    if a >= std::f64::consts::PI {
        0.0
    } else {
        a
    }
}

fn make_segment(source: usize, index: usize, polyline: Vec<Point>) -> StreetSegment {
    let length = arc_length(&polyline);
    let center = point_at_arc(&polyline, length / 2.0).0;
    let chord = polyline.last().unwrap().sub(polyline[0]);
    let mut seg = StreetSegment {
        source,
        index,
        polyline,
        center,
        azimuth: 0.0,
        length,
    };
    seg.azimuth = azimuth(if chord.norm() > 0.0 { chord } else { seg.tangent() });
    seg
}

/// Cuts each polyline into consecutive pieces of `interval` meters. A final
/// remainder longer than `interval / 2` stays a piece of its own, otherwise it
/// is merged into the previous piece.
pub fn segment_streets(polylines: &[Vec<Point>], interval: f64) -> Result<Vec<StreetSegment>> {
    if !(interval.is_finite() && interval > 0.0) {
        return Err(Error::invalid(format!("interval must be positive, got {interval}")));
    }
    let mut out = Vec::new();
    for (source, line) in polylines.iter().enumerate() {
        if line.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::invalid(format!("polyline {source} has a non-finite vertex")));
        }
        let total = arc_length(line);
        if line.len() < 2 || total <= 0.0 {
            return Err(Error::invalid(format!("polyline {source} has zero length")));
        }
        let full = (total / interval).floor() as usize;
        let rem = total - full as f64 * interval;
        let pieces = if full == 0 {
            1
        } else if rem > interval / 2.0 {
            full + 1
        } else {
            full
        };
        for i in 0..pieces {
            let from = i as f64 * interval;
            let to = if i + 1 == pieces { total } else { (i + 1) as f64 * interval };
            out.push(make_segment(source, i, slice_by_arc(line, from, to)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn straight(len: f64) -> Vec<Point> {
        vec![Point::new(0.0, 0.0), Point::new(len, 0.0)]
    }

    #[test]
    fn hundred_meters_merges_remainder() {
        let s = segment_streets(&[straight(100.0)], 40.0).unwrap();
        let lens: Vec<f64> = s.iter().map(|s| s.length).collect();
        assert_eq!(lens, vec![40.0, 60.0]);
    }

    #[test]
    fn remainder_over_half_is_kept() {
        let s = segment_streets(&[straight(110.0)], 40.0).unwrap();
        let lens: Vec<f64> = s.iter().map(|s| s.length).collect();
        assert_eq!(lens, vec![40.0, 40.0, 30.0]);
    }

    #[test]
    fn forty_meter_street() {
        let s = segment_streets(&[straight(40.0)], 40.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].center, Point::new(20.0, 0.0));
        assert_eq!(s[0].azimuth, PI / 2.0);
        let short = segment_streets(&[straight(15.0)], 40.0).unwrap();
        assert_eq!(short[0].length, 15.0);
    }

    #[test]
    fn azimuth_is_undirected() {
        assert_eq!(azimuth(Point::new(0.0, 1.0)), 0.0);
        assert_eq!(azimuth(Point::new(0.0, -1.0)), 0.0);
        assert!((azimuth(Point::new(-1.0, -1.0)) - PI / 4.0).abs() < 1e-15);
        assert!((azimuth(Point::new(1.0, -1.0)) - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(segment_streets(&[vec![Point::new(1.0, 1.0); 2]], 40.0).is_err());
        assert!(segment_streets(&[straight(10.0)], 0.0).is_err());
    }
}
