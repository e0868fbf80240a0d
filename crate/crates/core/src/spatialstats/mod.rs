//! Local and global spatial autocorrelation of rasters and point fields.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::streetgraph::geometry::Point;
use crate::{Error, Result};

pub const DEFAULT_KNN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// 4-connected pixels.
    Rook,
    /// 8-connected pixels.
    Queen,
    /// k nearest points.
    Knn,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Rook => "rook",
            Scheme::Queen => "queen",
            Scheme::Knn => "knn",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rook" => Ok(Scheme::Rook),
            "queen" => Ok(Scheme::Queen),
            "knn" => Ok(Scheme::Knn),
            _ => Err(Error::invalid(format!("unknown weights scheme '{s}' (rook, queen or knn)"))),
        }
    }
}

/// Sparse neighbour weights; row `i` lists `(j, w_ij)` with `j != i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialWeights {
    rows: Vec<Vec<(usize, f64)>>,
    row_standardized: bool,
}

impl SpatialWeights {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            for &(j, w) in row {
                if j >= n || j == i || !(w.is_finite() && w >= 0.0) {
                    return Err(Error::invalid(format!("bad weight w[{i}][{j}] = {w}")));
                }
            }
        }
        Ok(SpatialWeights {
            rows,
            row_standardized: false,
        })
    }

    /// Scales every non-empty row to sum to one.
    pub fn row_standardize(mut self) -> Self {
        for row in &mut self.rows {
            let s: f64 = row.iter().map(|&(_, w)| w).sum();
            if s > 0.0 {
                for (_, w) in row.iter_mut() {
                    *w /= s;
                }
            }
        }
        self.row_standardized = true;
        self
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn is_row_standardized(&self) -> bool {
        self.row_standardized
    }
}

/// Row-standardized pixel adjacency for a `height × width` raster in
/// row-major order.
pub fn raster_weights(height: usize, width: usize, scheme: Scheme) -> Result<SpatialWeights> {
    if height < 2 || width < 2 {
        return Err(Error::invalid(format!("raster must be at least 2×2, got {height}×{width}")));
    }
    let offsets: &[(i64, i64)] = match scheme {
        Scheme::Rook => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
        Scheme::Queen => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        Scheme::Knn => return Err(Error::invalid("knn weights need point coordinates")),
    };
    let (h, w) = (height as i64, width as i64);
    let rows = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| {
            offsets
                .iter()
                .map(|(dr, dc)| (r + dr, c + dc))
                .filter(|&(rr, cc)| rr >= 0 && rr < h && cc >= 0 && cc < w)
                .map(|(rr, cc)| ((rr * w + cc) as usize, 1.0))
                .collect()
        })
        .collect();
    Ok(SpatialWeights::new(rows)?.row_standardize())
}

/// Row-standardized `k`-nearest-neighbour weights; equal distances go to the
/// lower point index.
pub fn knn_weights(points: &[Point], k: usize) -> Result<SpatialWeights> {
    let n = points.len();
    if k == 0 || n <= k {
        return Err(Error::invalid(format!("need more than k = {k} points, got {n}")));
    }
    if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::invalid("non-finite point coordinate"));
    }
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (points[i].distance(points[j]), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
            d.into_iter().map(|(_, j)| (j, 1.0)).collect()
        })
        .collect();
    Ok(SpatialWeights::new(rows)?.row_standardize())
}

fn deviations(y: &[f64], weights: &SpatialWeights) -> Result<Vec<f64>> {
    if y.len() != weights.n() {
        return Err(Error::shape(format!("{} values", weights.n()), y.len()));
    }
    if y.len() < 2 {
        return Err(Error::invalid("need at least two values"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite field value"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let dev: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    let scale: f64 = y.iter().map(|v| v * v).sum();
    if y.iter().all(|&v| v == y[0]) || ss <= f64::EPSILON * f64::EPSILON * scale {
        return Err(Error::ZeroVariance("field is constant".into()));
    }
    Ok(dev)
}

/// `L_i = (n−1)·(y_i−ȳ)/Σ_{j≠i}(y_j−ȳ)² · Σ_{j≠i} w_ij (y_j−ȳ)`.
pub fn local_autocorr(y: &[f64], weights: &SpatialWeights) -> Result<Vec<f64>> {
    let dev = deviations(y, weights)?;
    let n = y.len() as f64;
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    Ok((0..y.len())
        .into_par_iter()
        .map(|i| {
            let denom = ss - dev[i] * dev[i];
            let lag: f64 = weights.row(i).iter().map(|&(j, w)| w * dev[j]).sum();
            (n - 1.0) * dev[i] / denom * lag
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalAutocorr {
    pub n: usize,
    /// `Σ L_i`.
    pub l_sum: f64,
    /// `Σ L_i / n`, Moran's I for row-standardized weights.
    pub l_mean: f64,
}

pub fn global_autocorr(y: &[f64], weights: &SpatialWeights) -> Result<GlobalAutocorr> {
    let li = local_autocorr(y, weights)?;
    Ok(summarize(&li))
}

pub fn summarize(li: &[f64]) -> GlobalAutocorr {
    let l_sum: f64 = li.iter().sum();
    GlobalAutocorr {
        n: li.len(),
        l_sum,
        l_mean: l_sum / li.len().max(1) as f64,
    }
}

/// Summary written next to the per-item values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoranReport {
    pub n: usize,
    pub scheme: Scheme,
    #[serde(rename = "L_mean")]
    pub l_mean: f64,
    #[serde(rename = "L_sum")]
    pub l_sum: f64,
    #[serde(rename = "Li_path")]
    pub li_path: String,
}
