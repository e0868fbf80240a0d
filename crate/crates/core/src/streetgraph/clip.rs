use std::collections::HashMap;

use super::geometry::{arc_length, clip_segment, snap_to_side, Point};
use super::{BBox, StreetGraph};
use crate::{Error, Result};

/// Restricts `graph` to the square of side `side` centred on `center`.
pub fn clip_bbox(graph: &StreetGraph, center: Point, side: f64) -> Result<StreetGraph> {
    if !(side.is_finite() && side > 0.0) {
        return Err(Error::invalid(format!("tile side must be positive, got {side}")));
    }
    clip_to_box(graph, &BBox::square(center, side))
}

/// Keeps nodes inside `bbox` (boundary included) and cuts edges where they
/// cross it. Each cut end becomes a new node lying exactly on the boundary;
/// cut pieces get their arc length, untouched edges keep their length.
pub fn clip_to_box(graph: &StreetGraph, bbox: &BBox) -> Result<StreetGraph> {
    let BBox {
        min_x,
        min_y,
        max_x,
        max_y,
    } = *bbox;
    let mut out = StreetGraph::new(graph.crs_note.clone());
    let mut kept: HashMap<usize, usize> = HashMap::new();
    for (i, n) in graph.nodes().iter().enumerate() {
        if bbox.contains(n.point()) {
            kept.insert(i, out.add_node(n.id.clone(), n.x, n.y)?);
        }
    }

    enum End {
        Node(usize),
        Cut(Point),
    }
    struct Piece {
        start: End,
        end: End,
        points: Vec<Point>,
    }

    let mut pieces: Vec<(usize, Piece)> = Vec::new();
    for (ei, e) in graph.edges().iter().enumerate() {
        let segs = e.polyline.len() - 1;
        let mut open: Option<Piece> = None;
        for (k, w) in e.polyline.windows(2).enumerate() {
            let Some((t0, t1, mut s0, mut s1)) = clip_segment(w[0], w[1], min_x, max_x, min_y, max_y)
            else {
                if let Some(p) = open.take() {
                    pieces.push((ei, p));
                }
                continue;
            };
            // contained ends are never cut, whatever the rounding in t
            if bbox.contains(w[0]) {
                s0 = None;
            }
            if bbox.contains(w[1]) {
                s1 = None;
            }
            let a = if s0.is_some() {
                snap_to_side(w[0].lerp(w[1], t0), s0, min_x, max_x, min_y, max_y)
            } else {
                w[0]
            };
            let b = if s1.is_some() {
                snap_to_side(w[0].lerp(w[1], t1), s1, min_x, max_x, min_y, max_y)
            } else {
                w[1]
            };
            let piece = open.get_or_insert_with(|| Piece {
                start: if k == 0 && s0.is_none() { End::Node(e.u) } else { End::Cut(a) },
                end: End::Node(e.v),
                points: vec![a],
            });
            piece.points.push(b);
            if s1.is_some() {
                let mut p = open.take().unwrap();
                p.end = End::Cut(b);
                pieces.push((ei, p));
            } else if k + 1 == segs {
                pieces.push((ei, open.take().unwrap()));
            }
        }
    }

    let mut counter: HashMap<usize, usize> = HashMap::new();
    for (ei, mut piece) in pieces {
        piece.points.dedup();
        let len = arc_length(&piece.points);
        if piece.points.len() < 2 || len <= 0.0 {
            continue;
        }
        let e = &graph.edges()[ei];
        let whole = matches!((&piece.start, &piece.end), (End::Node(_), End::Node(_)));
        let mut endpoint = |end: &End, out: &mut StreetGraph| -> Result<usize> {
            match end {
                End::Node(i) => Ok(kept[i]),
                End::Cut(p) => {
                    let uid = &graph.nodes()[e.u].id;
                    let vid = &graph.nodes()[e.v].id;
                    loop {
                        let c = counter.entry(ei).or_insert(0);
                        *c += 1;
                        let id = format!("{uid}~{vid}#{c}");
                        if out.node_index(&id).is_none() {
                            return out.add_node(id, p.x, p.y);
                        }
                    }
                }
            }
        };
        let u = endpoint(&piece.start, &mut out)?;
        let v = endpoint(&piece.end, &mut out)?;
        let first = piece.points[0];
        let last = *piece.points.last().unwrap();
        let interior = piece.points[1..piece.points.len() - 1].to_vec();
        debug_assert_eq!(out.nodes()[u].point(), first);
        debug_assert_eq!(out.nodes()[v].point(), last);
        out.add_edge(u, v, Some(if whole { e.length } else { len }), Some(interior))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: (f64, f64), b: (f64, f64)) -> StreetGraph {
        let mut g = StreetGraph::new("t");
        let u = g.add_node("a", a.0, a.1).unwrap();
        let v = g.add_node("b", b.0, b.1).unwrap();
        g.add_straight_edge(u, v).unwrap();
        g
    }

    #[test]
    fn inside_graph_is_unchanged() {
        let g = line((-10.0, 0.0), (10.0, 5.0));
        assert_eq!(clip_bbox(&g, Point::new(0.0, 0.0), 100.0).unwrap(), g);
    }

    #[test]
    fn crossing_edge_gets_boundary_node() {
        let g = line((0.0, 0.0), (100.0, 30.0));
        let c = clip_bbox(&g, Point::new(0.0, 0.0), 100.0).unwrap();
        assert_eq!(c.node_count(), 2);
        let synth = &c.nodes()[1];
        assert_eq!(synth.x, 50.0);
        assert!((synth.y - 15.0).abs() < 1e-12);
        assert!((c.edges()[0].length - 50f64.hypot(15.0)).abs() < 1e-9);
    }

    #[test]
    fn edge_passing_through_splits_into_both_cuts() {
        let g = line((-100.0, 1.0), (100.0, 1.0));
        let c = clip_bbox(&g, Point::new(0.0, 0.0), 10.0).unwrap();
        assert_eq!(c.node_count(), 2);
        assert_eq!(c.edge_count(), 1);
        assert_eq!(c.edges()[0].length, 10.0);
        assert_eq!((c.nodes()[0].x, c.nodes()[1].x), (-5.0, 5.0));
    }

    #[test]
    fn polyline_leaving_and_returning_gives_two_pieces() {
        let mut g = StreetGraph::new("t");
        let u = g.add_node("a", -1.0, 0.0).unwrap();
        let v = g.add_node("b", 1.0, 0.0).unwrap();
        g.add_edge(u, v, None, Some(vec![Point::new(-1.0, 10.0), Point::new(1.0, 10.0)]))
            .unwrap();
        let c = clip_bbox(&g, Point::new(0.0, 0.0), 4.0).unwrap();
        assert_eq!(c.edge_count(), 2);
        assert_eq!(c.total_length(), 4.0);
        assert_eq!(clip_bbox(&c, Point::new(0.0, 0.0), 4.0).unwrap(), c);
    }

    #[test]
    fn rejects_non_positive_side() {
        assert!(clip_bbox(&StreetGraph::default(), Point::default(), 0.0).is_err());
    }
}
