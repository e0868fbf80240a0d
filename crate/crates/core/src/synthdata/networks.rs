use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::item_rng;
use crate::streetgraph::StreetGraph;
use crate::{Error, Result};

pub(crate) fn jitter_dist(sigma: f64) -> Result<Option<Normal<f64>>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("jitter must be non-negative, got {sigma}")));
    }
    Ok((sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("valid sigma")))
}

/// Gaussian offset truncated at 3σ so tiles keep their margins.
pub(crate) fn jittered(dist: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match dist {
        Some(d) => {
            let cap = 3.0 * d.std_dev();
            (d.sample(rng).clamp(-cap, cap), d.sample(rng).clamp(-cap, cap))
        }
        None => (0.0, 0.0),
    }
}

/// `rows × cols` lattice of intersections (ids `r{i}c{j}`) with Gaussian
/// positional jitter; edges join horizontal and vertical neighbours.
pub fn gen_grid_network(rows: usize, cols: usize, spacing: f64, jitter: f64, seed: u64) -> Result<StreetGraph> {
    if rows < 2 || cols < 2 {
        return Err(Error::invalid(format!("grid needs at least 2×2 nodes, got {rows}×{cols}")));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
    }
    let dist = jitter_dist(jitter)?;
    let mut rng = item_rng(seed, 0);
    let mut g = StreetGraph::new(format!("synthetic grid {rows}x{cols}, spacing {spacing} m"));
    for i in 0..rows {
        for j in 0..cols {
            let (dx, dy) = jittered(&dist, &mut rng);
            g.add_node(format!("r{i}c{j}"), j as f64 * spacing + dx, i as f64 * spacing + dy)?;
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            let k = i * cols + j;
            if j + 1 < cols {
                g.add_straight_edge(k, k + 1)?;
            }
            if i + 1 < rows {
                g.add_straight_edge(k, k + cols)?;
            }
        }
    }
    Ok(g)
}

/// Centre node plus `rings × spokes` nodes on concentric rings; edges run
/// along spokes and around rings.
pub fn gen_radial_network(rings: usize, spokes: usize, ring_spacing: f64, jitter: f64, seed: u64) -> Result<StreetGraph> {
    if rings == 0 || spokes < 3 {
        return Err(Error::invalid("radial network needs at least 1 ring and 3 spokes"));
    }
    if !(ring_spacing.is_finite() && ring_spacing > 0.0) {
        return Err(Error::invalid(format!("ring spacing must be positive, got {ring_spacing}")));
    }
    radial_with_count(rings * spokes + 1, spokes, ring_spacing, 0.0, 0.0, jitter, &mut item_rng(seed, 0))
}

/// Radial layout truncated to exactly `count` nodes, centred on `(cx, cy)`.
pub(crate) fn radial_with_count(
    count: usize,
    spokes: usize,
    ring_spacing: f64,
    cx: f64,
    cy: f64,
    jitter: f64,
    rng: &mut ChaCha8Rng,
) -> Result<StreetGraph> {
    if spokes < 3 || count < 2 {
        return Err(Error::invalid("radial network needs at least 3 spokes and 2 nodes"));
    }
    let dist = jitter_dist(jitter)?;
    let mut g = StreetGraph::new("synthetic radial network");
    g.add_node("c", cx, cy)?;
    let rings = (count - 1).div_ceil(spokes);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut at = vec![vec![None; spokes]; rings];
    'outer: for (r, ring) in at.iter_mut().enumerate() {
        for (s, slot) in ring.iter_mut().enumerate() {
            if g.node_count() == count {
                break 'outer;
            }
            let a = phase + s as f64 * std::f64::consts::TAU / spokes as f64;
            let rad = (r + 1) as f64 * ring_spacing;
            let (dx, dy) = jittered(&dist, rng);
            *slot = Some(g.add_node(format!("k{r}s{s}"), cx + rad * a.cos() + dx, cy + rad * a.sin() + dy)?);
        }
    }
    for r in 0..rings {
        for s in 0..spokes {
            let Some(k) = at[r][s] else { continue };
            let inner = if r == 0 { Some(0) } else { at[r - 1][s] };
            if let Some(i) = inner {
                g.add_straight_edge(i, k)?;
            }
            if let Some(n) = at[r][(s + 1) % spokes] {
                g.add_straight_edge(k, n)?;
            }
        }
    }
    Ok(g)
}
