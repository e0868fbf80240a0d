//! Street networks: loading, tile clipping, rasterization and network statistics.

mod clip;
mod closeness;
pub mod geometry;
mod grid;
mod raster;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use geometry::{arc_length, Point};

pub use clip::clip_bbox;
pub use closeness::closeness_all;
pub use grid::{grid_stats, median, GridCell};
pub use raster::{rasterize, BBox, DEFAULT_RASTER_SIZE};

/// Mean Earth radius used by the local projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Default tile side in meters.
pub const DEFAULT_TILE_SIDE: f64 = 1500.0;
/// Allowed relative mismatch between a stated edge length and its polyline.
pub const LENGTH_TOLERANCE: f64 = 1e-3;
/// Distance under which a polyline end is taken to sit on its node.
const ENDPOINT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crs {
    Meters,
    Wgs84,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub u: String,
    pub v: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Vec<[f64; 2]>>,
}

/// On-disk graph document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub crs: Crs,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

impl Node {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Undirected edge between node indices. `polyline` always starts at `u`
/// and ends at `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
    pub polyline: Vec<Point>,
}

/// Street intersections (nodes) and street segments (edges) in meters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StreetGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<String, usize>,
    pub crs_note: String,
}

impl StreetGraph {
    pub fn new(crs_note: impl Into<String>) -> Self {
        StreetGraph {
            crs_note: crs_note.into(),
            ..Default::default()
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn add_node(&mut self, id: impl Into<String>, x: f64, y: f64) -> Result<usize> {
        let id = id.into();
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Graph(format!("node '{id}' has a non-finite coordinate")));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Graph(format!("duplicate node id '{id}'")));
        }
        let i = self.nodes.len();
        self.index.insert(id.clone(), i);
        self.nodes.push(Node { id, x, y });
        Ok(i)
    }

    /// Adds a straight edge whose length is the endpoint distance.
    pub fn add_straight_edge(&mut self, u: usize, v: usize) -> Result<usize> {
        self.add_edge(u, v, None, None)
    }

    /// Adds an edge. `interior` points sit between the endpoints; a missing
    /// `length` is taken from the polyline.
    pub fn add_edge(
        &mut self,
        u: usize,
        v: usize,
        length: Option<f64>,
        interior: Option<Vec<Point>>,
    ) -> Result<usize> {
        let n = self.nodes.len();
        if u >= n || v >= n {
            return Err(Error::Graph(format!("edge endpoint index out of range ({u}, {v})")));
        }
        let mut polyline = vec![self.nodes[u].point()];
        polyline.extend(interior.unwrap_or_default());
        polyline.push(self.nodes[v].point());
        self.push_edge(u, v, length, polyline)
    }

    fn push_edge(&mut self, u: usize, v: usize, length: Option<f64>, polyline: Vec<Point>) -> Result<usize> {
        let (uid, vid) = (&self.nodes[u].id, &self.nodes[v].id);
        if polyline.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::Graph(format!("edge {uid}-{vid} has a non-finite vertex")));
        }
        let arc = arc_length(&polyline);
        let length = match length {
            Some(l) => {
                if !l.is_finite() || l <= 0.0 {
                    return Err(Error::Graph(format!("edge {uid}-{vid} has invalid length {l}")));
                }
                if polyline.len() > 2 && (l - arc).abs() > LENGTH_TOLERANCE * arc {
                    return Err(Error::Graph(format!(
                        "edge {uid}-{vid}: length {l} differs from polyline arc length {arc:.3} by more than 0.1%"
                    )));
                }
                l
            }
            None if arc > 0.0 => arc,
            None => {
                return Err(Error::Graph(format!("edge {uid}-{vid} has zero length")));
            }
        };
        self.edges.push(Edge {
            u,
            v,
            length,
            polyline,
        });
        Ok(self.edges.len() - 1)
    }

    /// Bounding box of nodes and edge vertices; `None` for an empty graph.
    pub fn bounds(&self) -> Option<BBox> {
        let pts = self
            .nodes
            .iter()
            .map(Node::point)
            .chain(self.edges.iter().flat_map(|e| e.polyline.iter().copied()));
        BBox::enclosing(pts)
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Same graph with every edge length multiplied by `factor`.
    pub fn scaled_lengths(&self, factor: f64) -> StreetGraph {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.length *= factor;
        }
        g
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            crs: Crs::Meters,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.clone(),
                    x: n.x,
                    y: n.y,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    u: self.nodes[e.u].id.clone(),
                    v: self.nodes[e.v].id.clone(),
                    length: Some(e.length),
                    geometry: (e.polyline.len() > 2)
                        .then(|| e.polyline.iter().map(|p| [p.x, p.y]).collect()),
                })
                .collect(),
        }
    }

    /// Builds and validates a graph from a document, projecting lon/lat input.
    pub fn from_document(doc: &GraphDocument) -> Result<StreetGraph> {
        let project: Box<dyn Fn(f64, f64) -> Point> = match doc.crs {
            Crs::Meters => Box::new(Point::new),
            Crs::Wgs84 => {
                let n = doc.nodes.len().max(1) as f64;
                let lon0 = doc.nodes.iter().map(|p| p.x).sum::<f64>() / n;
                let lat0 = doc.nodes.iter().map(|p| p.y).sum::<f64>() / n;
                Box::new(move |lon, lat| project_equirectangular(lon, lat, lon0, lat0))
            }
        };
        let note = match doc.crs {
            Crs::Meters => "projected meters".to_string(),
            Crs::Wgs84 => "wgs84 projected to local equirectangular meters about the node centroid".to_string(),
        };
        let mut g = StreetGraph::new(note);
        for n in &doc.nodes {
            if !(n.x.is_finite() && n.y.is_finite()) {
                return Err(Error::Graph(format!("node '{}' has a non-finite coordinate", n.id)));
            }
            let p = project(n.x, n.y);
            g.add_node(n.id.clone(), p.x, p.y)?;
        }
        for e in &doc.edges {
            let lookup = |id: &str| {
                g.node_index(id)
                    .ok_or_else(|| Error::Graph(format!("edge references unknown node '{id}'")))
            };
            let (u, v) = (lookup(&e.u)?, lookup(&e.v)?);
            let polyline = match &e.geometry {
                None => vec![g.nodes[u].point(), g.nodes[v].point()],
                Some(coords) => {
                    if coords.iter().flatten().any(|c| !c.is_finite()) {
                        return Err(Error::Graph(format!("edge {}-{} has a non-finite vertex", e.u, e.v)));
                    }
                    let pts: Vec<Point> = coords.iter().map(|c| project(c[0], c[1])).collect();
                    orient_polyline(pts, g.nodes[u].point(), g.nodes[v].point()).ok_or_else(|| {
                        Error::Graph(format!("edge {}-{}: geometry does not run between its nodes", e.u, e.v))
                    })?
                }
            };
            g.push_edge(u, v, e.length, polyline)?;
        }
        Ok(g)
    }
}

/// Ensures `pts` runs from `a` to `b`, reversing it if needed.
fn orient_polyline(mut pts: Vec<Point>, a: Point, b: Point) -> Option<Vec<Point>> {
    let near = |p: Point, q: Point| p.distance(q) <= ENDPOINT_TOLERANCE * (1.0 + q.x.abs().max(q.y.abs()));
    if pts.len() < 2 {
        return None;
    }
    if !(near(pts[0], a) && near(*pts.last()?, b)) {
        pts.reverse();
        if !(near(pts[0], a) && near(*pts.last()?, b)) {
            return None;
        }
    }
    let last = pts.len() - 1;
    pts[0] = a;
    pts[last] = b;
    Some(pts)
}

/// `x = R·Δλ·cos φ₀`, `y = R·Δφ` (angles in degrees on input).
pub fn project_equirectangular(lon: f64, lat: f64, lon0: f64, lat0: f64) -> Point {
    let x = EARTH_RADIUS_M * (lon - lon0).to_radians() * lat0.to_radians().cos();
    let y = EARTH_RADIUS_M * (lat - lat0).to_radians();
    Point::new(x, y)
}

pub fn load_graph_str(text: &str) -> Result<StreetGraph> {
    let doc: GraphDocument = serde_json::from_str(text)?;
    StreetGraph::from_document(&doc)
}

pub fn load_graph(path: &Path) -> Result<StreetGraph> {
    let text = std::fs::read_to_string(path)?;
    let doc: GraphDocument =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    StreetGraph::from_document(&doc)
}

pub fn save_graph(graph: &StreetGraph, path: &Path) -> Result<()> {
    crate::io::write_json(path, &graph.to_document())
}
