//! Brute-force reference implementations shared by the integration tests and
//! the acceptance runner. None of them call into the code they check.

#![allow(dead_code)]

use convpca_core::spatialstats::SpatialWeights;
use convpca_core::streetgraph::geometry::Point;
use convpca_core::streetgraph::{BBox, StreetGraph};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues in
/// descending order and the matching unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let norm: f64 = a.iter().flatten().map(|x| x * x).sum();
        if off <= 1e-30 * norm.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (vals, vecs)
}

/// Covariance of the column-standardized data (`n − 1` denominators).
pub fn standardized_covariance(z: &Array2<f64>) -> Vec<Vec<f64>> {
    let (n, d) = z.dim();
    let mut x = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut mean = 0.0;
        for i in 0..n {
            mean += z[[i, j]];
        }
        mean /= n as f64;
        let mut var = 0.0;
        for i in 0..n {
            var += (z[[i, j]] - mean).powi(2);
        }
        let sd = (var / (n - 1) as f64).sqrt();
        for i in 0..n {
            x[i][j] = (z[[i, j]] - mean) / sd;
        }
    }
    let mut c = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let mut s = 0.0;
            for row in &x {
                s += row[a] * row[b];
            }
            c[a][b] = s / (n - 1) as f64;
        }
    }
    c
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    // mixed scales and some correlation between columns
    let base = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let mut z = base.clone();
    for j in 1..d {
        let w: f64 = rng.random_range(-0.8..0.8);
        for i in 0..n {
            z[[i, j]] += w * base[[i, j - 1]];
        }
    }
    for j in 0..d {
        let scale: f64 = rng.random_range(0.1..10.0);
        let shift: f64 = rng.random_range(-5.0..5.0);
        z.column_mut(j).mapv_inplace(|v| v * scale + shift);
    }
    z
}

/// All-pairs shortest paths by Floyd–Warshall, then closeness over each
/// node's reachable set.
pub fn floyd_warshall_closeness(g: &StreetGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in g.edges() {
        if e.length < d[e.u][e.v] {
            d[e.u][e.v] = e.length;
            d[e.v][e.u] = e.length;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    (0..n)
        .map(|u| {
            let reach: Vec<f64> = (0..n).map(|v| d[u][v]).filter(|x| x.is_finite()).collect();
            let total: f64 = reach.iter().sum();
            if reach.len() <= 1 || total <= 0.0 {
                0.0
            } else {
                (reach.len() - 1) as f64 / total
            }
        })
        .collect()
}

/// Random graph with `n` nodes in a 1 km square, a random spanning-ish edge
/// set and some lengths longer than the straight line.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra_edges: usize) -> StreetGraph {
    let mut g = StreetGraph::new("random");
    for i in 0..n {
        g.add_node(format!("n{i}"), rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0))
            .unwrap();
    }
    let add = |g: &mut StreetGraph, u: usize, v: usize, rng: &mut ChaCha8Rng| {
        if u == v {
            return;
        }
        let straight = g.nodes()[u].point().distance(g.nodes()[v].point()).max(1.0);
        let detour: f64 = rng.random_range(1.0..1.5);
        g.add_edge(u, v, Some(straight * detour), None).unwrap();
    };
    for v in 1..n {
        // leave a few nodes disconnected
        if rng.random_bool(0.9) {
            let u = rng.random_range(0..v);
            add(&mut g, u, v, rng);
        }
    }
    for _ in 0..extra_edges {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        add(&mut g, u, v, rng);
    }
    g
}

pub fn dense_weights(w: &SpatialWeights) -> Vec<Vec<f64>> {
    let n = w.n();
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        for &(j, v) in w.row(i) {
            row[j] += v;
        }
    }
    m
}

/// Direct double-loop evaluation of the local autocorrelation formula.
pub fn naive_local_moran(y: &[f64], w: &[Vec<f64>]) -> Vec<f64> {
    let n = y.len();
    let mut mean = 0.0;
    for v in y {
        mean += v;
    }
    mean /= n as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut denom = 0.0;
        let mut lag = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            denom += (y[j] - mean) * (y[j] - mean);
            lag += w[i][j] * (y[j] - mean);
        }
        out.push((n as f64 - 1.0) * (y[i] - mean) / denom * lag);
    }
    out
}

/// Neighbour lists of a raster by exhaustive pairwise enumeration.
pub fn adjacency_oracle(h: usize, w: usize, queen: bool) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); h * w];
    for a in 0..h * w {
        for b in 0..h * w {
            let (ra, ca) = ((a / w) as i64, (a % w) as i64);
            let (rb, cb) = ((b / w) as i64, (b % w) as i64);
            let (dr, dc) = ((ra - rb).abs(), (ca - cb).abs());
            let adjacent = if queen { dr.max(dc) == 1 } else { dr + dc == 1 };
            if adjacent {
                out[a].push(b);
            }
        }
    }
    out
}

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Great-circle distance in meters.
pub fn haversine(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().asin()
}

/// Length of a segment inside an axis-aligned box, by cutting it against the
/// four half-planes one after another.
pub fn clipped_segment_length(a: Point, b: Point, bbox: &BBox) -> f64 {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let d = (b.x - a.x, b.y - a.y);
    // each constraint: value(t) = c + k·t ≥ 0
    let planes = [
        (a.x - bbox.min_x, d.0),
        (bbox.max_x - a.x, -d.0),
        (a.y - bbox.min_y, d.1),
        (bbox.max_y - a.y, -d.1),
    ];
    for (c, k) in planes {
        if k == 0.0 {
            if c < 0.0 {
                return 0.0;
            }
            continue;
        }
        let t = -c / k;
        if k > 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
    }
    if t1 <= t0 {
        0.0
    } else {
        (t1 - t0) * (d.0 * d.0 + d.1 * d.1).sqrt()
    }
}

pub fn clipped_graph_length(g: &StreetGraph, bbox: &BBox) -> f64 {
    g.edges()
        .iter()
        .flat_map(|e| e.polyline.windows(2).map(|w| clipped_segment_length(w[0], w[1], bbox)))
        .sum()
}

/// Pearson correlation of two columns.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
