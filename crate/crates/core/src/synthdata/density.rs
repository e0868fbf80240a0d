use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::item_rng;
use super::networks::{jitter_dist, jittered, radial_with_count};
use crate::neural::ImageTensor;
use crate::streetgraph::{rasterize, BBox, StreetGraph};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub count: usize,
    /// Nodes per km².
    pub min_density: f64,
    pub max_density: f64,
    pub tile_side: f64,
    pub raster_size: usize,
    /// Jitter σ as a fraction of the street spacing.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec {
            count: 320,
            min_density: 10.0,
            max_density: 200.0,
            tile_side: 1500.0,
            raster_size: 64,
            jitter: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileLayout {
    Grid,
    Radial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityTile {
    pub id: String,
    pub layout: TileLayout,
    /// Street graph in tile-local meters, `[0, side]²`.
    pub graph: StreetGraph,
    pub image: ImageTensor,
    pub node_count: usize,
    /// `node_count / side²` in nodes per km².
    pub density: f64,
    /// South-west corner of the tile on the synthetic city map.
    pub origin: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityCorpus {
    pub spec: DensitySpec,
    pub tiles: Vec<DensityTile>,
}

impl DensityCorpus {
    pub fn labels(&self) -> Vec<f64> {
        self.tiles.iter().map(|t| t.density).collect()
    }

    pub fn images(&self) -> Vec<ImageTensor> {
        self.tiles.iter().map(|t| t.image.clone()).collect()
    }

    /// `(min, max)` of the labels, used for min-max normalisation.
    pub fn label_range(&self) -> (f64, f64) {
        let l = self.labels();
        (
            l.iter().cloned().fold(f64::INFINITY, f64::min),
            l.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

/// Lattice of exactly `count` nodes filling `[m, side−m]²` row by row.
fn grid_tile(count: usize, side: f64, jitter: f64, rng: &mut ChaCha8Rng) -> Result<StreetGraph> {
    let cols = ((count as f64).sqrt().ceil() as usize).max(2);
    let rows = count.div_ceil(cols).max(2);
    let margin = side * 0.05;
    let sx = (side - 2.0 * margin) / (cols - 1) as f64;
    let sy = (side - 2.0 * margin) / (rows - 1) as f64;
    let dist = jitter_dist(jitter * sx.min(sy))?;
    let mut g = StreetGraph::new("synthetic grid tile");
    for k in 0..count {
        let (i, j) = (k / cols, k % cols);
        let (dx, dy) = jittered(&dist, rng);
        g.add_node(format!("r{i}c{j}"), margin + j as f64 * sx + dx, margin + i as f64 * sy + dy)?;
    }
    for k in 0..count {
        if (k % cols) + 1 < cols && k + 1 < count {
            g.add_straight_edge(k, k + 1)?;
        }
        if k + cols < count {
            g.add_straight_edge(k, k + cols)?;
        }
    }
    Ok(g)
}

fn radial_tile(count: usize, side: f64, jitter: f64, rng: &mut ChaCha8Rng) -> Result<StreetGraph> {
    let spokes = ((count as f64).sqrt().round() as usize).clamp(4, 24);
    let rings = (count - 1).div_ceil(spokes).max(1);
    let ring_spacing = (side / 2.0 - side * 0.05) / rings as f64;
    let sigma = (jitter * ring_spacing).min(side * 0.05 / 4.0);
    radial_with_count(count, spokes, ring_spacing, side / 2.0, side / 2.0, sigma, rng)
}

/// Street-network tiles whose node counts span `[min_density, max_density]`
/// evenly. Labels are exact node counts per km².
pub fn gen_density_corpus(spec: &DensitySpec) -> Result<DensityCorpus> {
    if spec.count < 10 {
        return Err(Error::invalid(format!("density corpus needs at least 10 tiles, got {}", spec.count)));
    }
    let area_km2 = (spec.tile_side / 1000.0).powi(2);
    if !(spec.min_density > 0.0 && spec.max_density >= spec.min_density && spec.max_density.is_finite()) {
        return Err(Error::invalid("density range must satisfy 0 < min ≤ max"));
    }
    if !(spec.tile_side.is_finite() && spec.tile_side > 0.0) || spec.raster_size < 4 {
        return Err(Error::invalid("tile side must be positive and raster size at least 4"));
    }
    let n = spec.count;
    let width = (n as f64).sqrt().ceil() as usize;

    // Even spread of target densities, assigned along a noisy west-east gradient.
    let mut rng = item_rng(spec.seed, 0);
    let mut keys: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let gx = (i % width) as f64 / (width.max(2) - 1) as f64;
            (gx + rng.random_range(-0.5..0.5), i)
        })
        .collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut targets = vec![0.0; n];
    for (rank, &(_, i)) in keys.iter().enumerate() {
        let t = rank as f64 / (n - 1) as f64;
        targets[i] = spec.min_density + t * (spec.max_density - spec.min_density);
    }
    let mut layouts: Vec<TileLayout> = (0..n)
        .map(|i| if i % 2 == 0 { TileLayout::Grid } else { TileLayout::Radial })
        .collect();
    layouts.shuffle(&mut rng);

    let bbox = BBox::new(0.0, 0.0, spec.tile_side, spec.tile_side);
    let tiles = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(spec.seed, i as u64 + 1);
            let count = ((targets[i] * area_km2).round() as usize).max(4);
            let graph = match layouts[i] {
                TileLayout::Grid => grid_tile(count, spec.tile_side, spec.jitter, &mut rng)?,
                TileLayout::Radial => radial_tile(count, spec.tile_side, spec.jitter, &mut rng)?,
            };
            let image = rasterize(&graph, &bbox, spec.raster_size)?;
            Ok(DensityTile {
                id: format!("tile{i:04}"),
                layout: layouts[i],
                node_count: graph.node_count(),
                density: graph.node_count() as f64 / area_km2,
                graph,
                image,
                origin: ((i % width) as f64 * spec.tile_side, (i / width) as f64 * spec.tile_side),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityCorpus { spec: *spec, tiles })
}
