use serde::{Deserialize, Serialize};

use super::StreetGraph;
use crate::{Error, Result};

/// One square cell of the aggregation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub col: usize,
    pub row: usize,
    pub origin_x: f64,
    pub origin_y: f64,
    pub side: f64,
    pub node_count: usize,
    /// Nodes per km².
    pub intersection_density: f64,
    /// `None` for empty cells.
    pub median_closeness: Option<f64>,
    pub empty: bool,
}

/// Median with the even-count rule (mean of the middle two); `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Aggregates node counts, densities and median closeness on a grid of
/// `cell_side`-meter cells anchored at the node bounding-box minimum.
///
/// `closeness` holds one value per node and should come from the whole graph.
/// Cells are returned row by row from the south, west to east; nodes on the
/// far boundary fall into the last cell.
pub fn grid_stats(graph: &StreetGraph, closeness: &[f64], cell_side: f64) -> Result<Vec<GridCell>> {
    if !(cell_side.is_finite() && cell_side > 0.0) {
        return Err(Error::invalid(format!("cell side must be positive, got {cell_side}")));
    }
    if closeness.len() != graph.node_count() {
        return Err(Error::shape(
            format!("{} closeness values", graph.node_count()),
            closeness.len(),
        ));
    }
    let nodes = graph.nodes();
    if nodes.is_empty() {
        return Ok(Vec::new());
    }
    let min_x = nodes.iter().map(|n| n.x).fold(f64::INFINITY, f64::min);
    let min_y = nodes.iter().map(|n| n.y).fold(f64::INFINITY, f64::min);
    let max_x = nodes.iter().map(|n| n.x).fold(f64::NEG_INFINITY, f64::max);
    let max_y = nodes.iter().map(|n| n.y).fold(f64::NEG_INFINITY, f64::max);
    let count = |span: f64| ((span / cell_side).ceil() as usize).max(1);
    let (cols, rows) = (count(max_x - min_x), count(max_y - min_y));

    let mut members: Vec<Vec<f64>> = vec![Vec::new(); cols * rows];
    for (n, &c) in nodes.iter().zip(closeness) {
        let ci = (((n.x - min_x) / cell_side).floor() as usize).min(cols - 1);
        let ri = (((n.y - min_y) / cell_side).floor() as usize).min(rows - 1);
        members[ri * cols + ci].push(c);
    }
    let area_km2 = (cell_side / 1000.0).powi(2);
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            let (row, col) = (i / cols, i % cols);
            GridCell {
                col,
                row,
                origin_x: min_x + col as f64 * cell_side,
                origin_y: min_y + row as f64 * cell_side,
                side: cell_side,
                node_count: m.len(),
                intersection_density: m.len() as f64 / area_km2,
                median_closeness: median(&m),
                empty: m.is_empty(),
            }
        })
        .collect())
}
