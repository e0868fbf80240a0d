use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::item_rng;
use crate::neural::ImageTensor;
use crate::streetgraph::geometry::Point;
use crate::urbangeom::BuildingFootprint;
use crate::{Error, Result};

pub const CANYON_STREET_LENGTH: f64 = 40.0;
const BUILDING_DEPTH: f64 = 12.0;
const BUILDING_HALF_LENGTH: f64 = 30.0;

/// Straight street centred on the origin with one building on each side.
#[derive(Clone, Debug, PartialEq)]
pub struct CanyonScene {
    pub street: Vec<Point>,
    /// `[left, right]` relative to the street direction.
    pub buildings: Vec<BuildingFootprint>,
    /// `((h_l + h_r) / 2) / (w_l + w_r)`.
    pub enc: f64,
}

/// Street along +x rotated by `rotation` radians about the origin; walls at
/// `half_width_left` (+y side) and `half_width_right` (−y side).
pub fn gen_canyon_scene(
    h_left: f64,
    h_right: f64,
    half_width_left: f64,
    half_width_right: f64,
    rotation: f64,
) -> Result<CanyonScene> {
    let dims = [h_left, h_right, half_width_left, half_width_right];
    if dims.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !rotation.is_finite() {
        return Err(Error::invalid("canyon dimensions must be positive and finite"));
    }
    let (s, c) = rotation.sin_cos();
    let rot = |p: Point| Point::new(c * p.x - s * p.y, s * p.x + c * p.y);
    let h = CANYON_STREET_LENGTH / 2.0;
    let street = vec![rot(Point::new(-h, 0.0)), rot(Point::new(h, 0.0))];
    let left = BuildingFootprint::rectangle(
        rot(Point::new(0.0, half_width_left + BUILDING_DEPTH / 2.0)),
        BUILDING_HALF_LENGTH,
        BUILDING_DEPTH / 2.0,
        rotation,
        h_left,
    )?;
    let right = BuildingFootprint::rectangle(
        rot(Point::new(0.0, -half_width_right - BUILDING_DEPTH / 2.0)),
        BUILDING_HALF_LENGTH,
        BUILDING_DEPTH / 2.0,
        rotation,
        h_right,
    )?;
    Ok(CanyonScene {
        street,
        buildings: vec![left, right],
        enc: ((h_left + h_right) / 2.0) / (half_width_left + half_width_right),
    })
}

/// Street-frontage classes of the synthetic street-level corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontageClass {
    BothActive,
    SingleActive,
    NonActive,
    NonUrban,
}

impl FrontageClass {
    pub const ALL: [FrontageClass; 4] = [
        FrontageClass::BothActive,
        FrontageClass::SingleActive,
        FrontageClass::NonActive,
        FrontageClass::NonUrban,
    ];

    pub fn label(&self) -> usize {
        *self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontageSpec {
    pub count: usize,
    pub size: usize,
    /// Per-pixel Gaussian noise σ.
    pub noise: f64,
    pub seed: u64,
}

impl Default for FrontageSpec {
    fn default() -> Self {
        FrontageSpec {
            count: 800,
            size: 32,
            noise: 0.03,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontageItem {
    pub id: String,
    pub class: FrontageClass,
    pub image: ImageTensor,
    /// Enclosure of the canyon the view was drawn from (`None` for non-urban).
    pub enc: Option<f64>,
}

type Rgb = [f64; 3];

fn fill(img: &mut ImageTensor, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, color: Rgb) {
    for y in rows {
        for x in cols.clone() {
            for (c, v) in color.iter().enumerate() {
                img.set(y, x, c, *v);
            }
        }
    }
}

fn shade(c: Rgb, f: f64) -> Rgb {
    [c[0] * f, c[1] * f, c[2] * f]
}

/// One perspective-free street view: sky above the horizon, road below, a
/// facade on each side whose height follows the canyon's height to width
/// ratio. Active frontages get a lit shop-window band at street level.
fn render_view(class: FrontageClass, size: usize, noise: f64, rng: &mut ChaCha8Rng) -> Result<(ImageTensor, Option<f64>)> {
    let s = size as f64;
    let mut img = ImageTensor::zeros(size, size, 3);
    let horizon = ((s * rng.random_range(0.55..0.65)) as usize).min(size - 1);
    let sky: Rgb = [0.55, 0.7, rng.random_range(0.85..0.95)];
    for y in 0..horizon {
        let f = 0.85 + 0.15 * y as f64 / horizon.max(1) as f64;
        fill(&mut img, y..y + 1, 0..size, shade(sky, f));
    }
    let road = rng.random_range(0.3..0.45);
    fill(&mut img, horizon..size, 0..size, [road, road, road]);

    let enc = if class == FrontageClass::NonUrban {
        let grass: Rgb = [0.25, rng.random_range(0.45..0.6), 0.2];
        fill(&mut img, horizon..size, 0..size / 4, grass);
        fill(&mut img, horizon..size, size - size / 4..size, grass);
        for _ in 0..rng.random_range(2..5) {
            let x0 = rng.random_range(0..size - size / 6);
            let w = rng.random_range(size / 10..size / 5).max(1);
            let top = rng.random_range(horizon / 4..horizon.max(horizon / 4 + 1));
            fill(&mut img, top..horizon, x0..(x0 + w).min(size), [0.15, rng.random_range(0.35..0.5), 0.15]);
        }
        None
    } else {
        let h = [rng.random_range(6.0..30.0), rng.random_range(6.0..30.0)];
        let w = [rng.random_range(5.0..15.0), rng.random_range(5.0..15.0)];
        let scene = gen_canyon_scene(h[0], h[1], w[0], w[1], 0.0)?;
        let active = match class {
            FrontageClass::BothActive => [true, true],
            FrontageClass::SingleActive => {
                let left = rng.random_bool(0.5);
                [left, !left]
            }
            _ => [false, false],
        };
        for side in 0..2 {
            let facade: Rgb = [
                rng.random_range(0.45..0.75),
                rng.random_range(0.35..0.6),
                rng.random_range(0.3..0.5),
            ];
            // nearer walls look wider, taller walls reach higher
            let width = ((s * 0.18 * 10.0 / w[side]).round() as usize).clamp(size / 8, size * 2 / 5);
            let top = horizon.saturating_sub(((s * 0.5 * h[side] / (h[side] + w[side])) as usize).min(horizon));
            let cols = if side == 0 { 0..width } else { size - width..size };
            fill(&mut img, top..horizon, cols.clone(), facade);
            // upper-floor windows on every building
            for y in (top + 1..horizon.saturating_sub(size / 8)).step_by(3) {
                for x in cols.clone().skip(1).step_by(3) {
                    fill(&mut img, y..y + 1, x..x + 1, shade(facade, 0.6));
                }
            }
            if active[side] {
                let band = (size / 8).max(2);
                let lit: Rgb = [0.98, 0.9, rng.random_range(0.4..0.7)];
                for x in cols.clone().step_by(2) {
                    fill(&mut img, horizon - band..horizon, x..x + 1, lit);
                }
            }
        }
        Some(scene.enc)
    };

    if noise > 0.0 {
        let n = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
        for y in 0..size {
            for x in 0..size {
                for c in 0..3 {
                    let v = img.get(y, x, c) + n.sample(rng);
                    img.set(y, x, c, v);
                }
            }
        }
    }
    Ok((img, enc))
}

/// Balanced 4-class corpus of shaded RGB street views.
pub fn gen_frontage_corpus(spec: &FrontageSpec) -> Result<Vec<FrontageItem>> {
    if spec.count < 4 {
        return Err(Error::invalid("frontage corpus needs at least 4 items"));
    }
    if spec.size < 16 {
        return Err(Error::invalid("frontage images must be at least 16 pixels"));
    }
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(Error::invalid("noise must be non-negative"));
    }
    (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let class = FrontageClass::ALL[i % 4];
            let mut rng = item_rng(spec.seed, i as u64 + 1);
            let (image, enc) = render_view(class, spec.size, spec.noise, &mut rng)?;
            Ok(FrontageItem {
                id: format!("view{i:04}"),
                class,
                image,
                enc,
            })
        })
        .collect()
}
