use serde::{Deserialize, Serialize};

use super::geometry::{clip_segment, Point};
use super::StreetGraph;
use crate::neural::ImageTensor;
use crate::{Error, Result};

pub const DEFAULT_RASTER_SIZE: usize = 256;

/// Axis-aligned box in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        BBox {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn square(center: Point, side: f64) -> Self {
        let h = side / 2.0;
        BBox::new(center.x - h, center.y - h, center.x + h, center.y + h)
    }

    pub fn enclosing(points: impl IntoIterator<Item = Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let p = it.next()?;
        let mut b = BBox::new(p.x, p.y, p.x, p.y);
        for p in it {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> Point {
        Point::new((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.min_x, self.min_y, self.max_x, self.max_y].iter().all(|v| v.is_finite());
        if !finite || self.width() <= 0.0 || self.height() <= 0.0 {
            return Err(Error::invalid(format!("bounding box must have positive area: {self:?}")));
        }
        Ok(())
    }

    /// Pixel containing `p`; row 0 is the northern edge.
    fn pixel(&self, p: Point, size: usize) -> (i64, i64) {
        let max = size as i64 - 1;
        let col = ((p.x - self.min_x) / self.width() * size as f64).floor() as i64;
        let row = ((self.max_y - p.y) / self.height() * size as f64).floor() as i64;
        (col.clamp(0, max), row.clamp(0, max))
    }
}

/// Draws every polyline segment inside `bbox` as a 1-pixel line (street = 1,
/// background = 0) on a `size × size` single-channel image.
pub fn rasterize(graph: &StreetGraph, bbox: &BBox, size: usize) -> Result<ImageTensor> {
    bbox.validate()?;
    if size == 0 {
        return Err(Error::invalid("raster size must be positive"));
    }
    let mut img = ImageTensor::zeros(size, size, 1);
    for e in graph.edges() {
        for w in e.polyline.windows(2) {
            let Some((t0, t1, _, _)) = clip_segment(w[0], w[1], bbox.min_x, bbox.max_x, bbox.min_y, bbox.max_y)
            else {
                continue;
            };
            let a = bbox.pixel(w[0].lerp(w[1], t0), size);
            let b = bbox.pixel(w[0].lerp(w[1], t1), size);
            bresenham(a, b, |x, y| img.set(y as usize, x as usize, 0, 1.0));
        }
    }
    Ok(img)
}

/// Integer line from `a` to `b`, both ends included.
fn bresenham((mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), mut plot: impl FnMut(i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(x0, y0);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}
