mod oracles;

use convpca_core::io::encode_pnm;
use convpca_core::streetgraph::geometry::Point;
use convpca_core::streetgraph::{
    clip_bbox, closeness_all, grid_stats, load_graph_str, rasterize, BBox, StreetGraph,
};
use convpca_core::synthdata::gen_grid_network;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const SAMPLE: &str = r#"{
  "crs": "meters",
  "nodes": [
    {"id": "a", "x": 0, "y": 0}, {"id": "b", "x": 400, "y": 0},
    {"id": "c", "x": 400, "y": 300}, {"id": "d", "x": 0, "y": 300}
  ],
  "edges": [
    {"u": "a", "v": "b"}, {"u": "b", "v": "c"}, {"u": "c", "v": "d"},
    {"u": "d", "v": "a", "geometry": [[0, 300], [-50, 150], [0, 0]]}, {"u": "a", "v": "c"}
  ]
}"#;

fn segment(a: (f64, f64), b: (f64, f64)) -> StreetGraph {
    let mut g = StreetGraph::new("test");
    let u = g.add_node("u", a.0, a.1).unwrap();
    let v = g.add_node("v", b.0, b.1).unwrap();
    g.add_straight_edge(u, v).unwrap();
    g
}

#[test]
fn missing_length_is_euclidean() {
    let g = load_graph_str(SAMPLE).unwrap();
    assert_eq!(g.edges()[0].length, 400.0);
    assert_eq!(g.edges()[4].length, 500.0);
    let bend = 2.0 * (50.0f64 * 50.0 + 150.0 * 150.0).sqrt();
    assert!((g.edges()[3].length - bend).abs() < 1e-9);
    // geometry given from d to a is kept in that order
    assert_eq!(g.edges()[3].polyline[1], Point::new(-50.0, 150.0));
}

#[test]
fn unknown_node_is_named() {
    let doc = r#"{"crs": "meters", "nodes": [{"id": "a", "x": 0, "y": 0}], "edges": [{"u": "a", "v": "zz9"}]}"#;
    let err = load_graph_str(doc).unwrap_err().to_string();
    assert!(err.contains("zz9"), "{err}");
}

#[test]
fn inconsistent_length_is_rejected() {
    let doc = r#"{"crs": "meters", "nodes": [{"id": "a", "x": 0, "y": 0}, {"id": "b", "x": 100, "y": 0}],
      "edges": [{"u": "a", "v": "b", "length": 150, "geometry": [[0, 0], [50, 0], [100, 0]]}]}"#;
    assert!(load_graph_str(doc).is_err());
}

#[test]
fn lonlat_projection_tracks_haversine() {
    let nodes = [(-0.1276, 51.5072), (-0.1150, 51.5120), (-0.1320, 51.4990), (-0.1205, 51.5035)];
    let doc = format!(
        r#"{{"crs": "wgs84", "nodes": [{}], "edges": []}}"#,
        nodes
            .iter()
            .enumerate()
            .map(|(i, (x, y))| format!(r#"{{"id": "n{i}", "x": {x}, "y": {y}}}"#))
            .collect::<Vec<_>>()
            .join(",")
    );
    let g = load_graph_str(&doc).unwrap();
    for i in 0..4 {
        for j in i + 1..4 {
            let want = oracles::haversine(nodes[i].0, nodes[i].1, nodes[j].0, nodes[j].1);
            let got = g.nodes()[i].point().distance(g.nodes()[j].point());
            assert!((got - want).abs() / want < 0.005, "{i}-{j}: {got} vs {want}");
        }
    }
}

#[test]
fn clip_of_contained_graph_is_identity() {
    let g = load_graph_str(SAMPLE).unwrap();
    let clipped = clip_bbox(&g, Point::new(175.0, 150.0), 1000.0).unwrap();
    assert_eq!(clipped.nodes(), g.nodes());
    assert_eq!(clipped.edges(), g.edges());
}

#[test]
fn single_crossing_adds_boundary_node() {
    let g = segment((0.0, 0.0), (200.0, 0.0));
    let c = clip_bbox(&g, Point::new(0.0, 0.0), 200.0).unwrap();
    assert_eq!(c.node_count(), 2);
    assert_eq!(c.edge_count(), 1);
    let cut = c.nodes().iter().find(|n| n.id != "u").unwrap();
    assert_eq!(cut.point(), Point::new(100.0, 0.0));
    assert!((c.edges()[0].length - 100.0).abs() < 1e-9);
}

#[test]
fn clipped_length_matches_half_plane_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let g = oracles::random_graph(&mut rng, 30, 20);
        let centre = Point::new(rng.random_range(200.0..800.0), rng.random_range(200.0..800.0));
        let side = rng.random_range(100.0..900.0);
        let c = clip_bbox(&g, centre, side).unwrap();
        // straight edges only, so arc length is the stored length for cut pieces
        let got: f64 = c
            .edges()
            .iter()
            .map(|e| e.polyline.windows(2).map(|w| w[0].distance(w[1])).sum::<f64>())
            .sum();
        let want = oracles::clipped_graph_length(&g, &BBox::square(centre, side));
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        let bbox = BBox::square(centre, side);
        let slack = 1e-9 * side;
        for n in c.nodes() {
            assert!(n.x >= bbox.min_x - slack && n.x <= bbox.max_x + slack);
            assert!(n.y >= bbox.min_y - slack && n.y <= bbox.max_y + slack);
        }
    }
}

#[test]
fn raster_of_empty_graph_is_black() {
    let img = rasterize(&StreetGraph::new("empty"), &BBox::new(0.0, 0.0, 1500.0, 1500.0), 64).unwrap();
    assert!(img.data().iter().all(|&v| v == 0.0));
}

#[test]
fn horizontal_centre_line_fills_one_row() {
    let g = segment((-10.0, 750.0), (1510.0, 750.0));
    let img = rasterize(&g, &BBox::new(0.0, 0.0, 1500.0, 1500.0), 64).unwrap();
    let full: Vec<usize> = (0..64).filter(|&r| (0..64).all(|c| img.get(r, c, 0) == 1.0)).collect();
    assert_eq!(full, vec![32]);
    assert_eq!(img.data().iter().filter(|&&v| v > 0.0).count(), 64);
}

#[test]
fn raster_golden_digest() {
    let g = load_graph_str(SAMPLE).unwrap();
    let img = rasterize(&g, &BBox::square(Point::new(200.0, 150.0), 600.0), 64).unwrap();
    let again = rasterize(&g, &BBox::square(Point::new(200.0, 150.0), 600.0), 64).unwrap();
    assert_eq!(img, again);
    // edge a-b: y = 0 is row 48, x in [0, 400] spans columns 10..=53
    let row: Vec<usize> = (0..64).filter(|&c| img.get(48, c, 0) == 1.0).collect();
    assert_eq!(row, (10..=53).collect::<Vec<_>>());
    let digest = hex::encode(Sha256::digest(encode_pnm(&img)));
    assert_eq!(digest, "27be9dd62fe53ccaaf469e9f38f5e6c50e7c42ff6d62cb28f5a317fa024e8f8a");
}

#[test]
fn closeness_matches_floyd_warshall() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let g = oracles::random_graph(&mut rng, 40, 30);
        let got = closeness_all(&g).unwrap();
        let want = oracles::floyd_warshall_closeness(&g);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12), "{a} vs {b}");
        }
    }
}

#[test]
fn five_nodes_in_a_tile_give_density() {
    let mut g = StreetGraph::new("t");
    for (i, (x, y)) in [(0.0, 0.0), (1500.0, 0.0), (0.0, 1500.0), (1500.0, 1500.0), (750.0, 750.0)].iter().enumerate() {
        g.add_node(format!("n{i}"), *x, *y).unwrap();
    }
    let cells = grid_stats(&g, &[0.0; 5], 1500.0).unwrap();
    assert_eq!(cells.len(), 1);
    assert!((cells[0].intersection_density - 2.222).abs() < 1e-3);
}

#[test]
fn uniform_grid_spreads_nodes_evenly() {
    // 6×6 nodes at 250 m in 500 m cells: two per axis in each cell
    let g = gen_grid_network(6, 6, 250.0, 0.0, 0).unwrap();
    let c = closeness_all(&g).unwrap();
    let cells = grid_stats(&g, &c, 500.0).unwrap();
    assert_eq!(cells.len(), 9);
    let counts: Vec<usize> = cells.iter().map(|c| c.node_count).collect();
    assert_eq!(counts.iter().sum::<usize>(), 36);
    assert_eq!(counts, vec![4, 4, 4, 4, 4, 4, 4, 4, 4]);
    assert!(cells.iter().all(|c| (c.intersection_density - 16.0).abs() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clipping_is_idempotent(seed in any::<u64>(), cx in 100.0..900.0f64, cy in 100.0..900.0f64, side in 50.0..1200.0f64) {
        let g = oracles::random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 25, 15);
        let once = clip_bbox(&g, Point::new(cx, cy), side).unwrap();
        let twice = clip_bbox(&once, Point::new(cx, cy), side).unwrap();
        prop_assert_eq!(once.node_count(), twice.node_count());
        prop_assert_eq!(once.edge_count(), twice.edge_count());
        prop_assert!((once.total_length() - twice.total_length()).abs() < 1e-9 * once.total_length().max(1.0));
    }

    #[test]
    fn closeness_scales_inversely_with_length(seed in any::<u64>(), factor in 0.01..100.0f64) {
        let g = oracles::random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 20, 10);
        let base = closeness_all(&g).unwrap();
        let scaled = closeness_all(&g.scaled_lengths(factor)).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((b * factor - a).abs() <= 1e-9 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn closeness_is_permutation_equivariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = oracles::random_graph(&mut rng, 20, 10);
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        perm.shuffle(&mut rng);
        // node i of g becomes node perm[i] of h
        let mut inv = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let mut h = StreetGraph::new("perm");
        for &i in &inv {
            let n = &g.nodes()[i];
            h.add_node(n.id.clone(), n.x, n.y).unwrap();
        }
        for e in g.edges() {
            h.add_edge(perm[e.u], perm[e.v], Some(e.length), None).unwrap();
        }
        let a = closeness_all(&g).unwrap();
        let b = closeness_all(&h).unwrap();
        for i in 0..a.len() {
            prop_assert!((a[i] - b[perm[i]]).abs() <= 1e-12 * a[i].abs().max(1e-12));
        }
    }

    #[test]
    fn grid_counts_add_up(seed in any::<u64>(), n in 1usize..60, side in 50.0..2000.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = StreetGraph::new("pts");
        for i in 0..n {
            g.add_node(format!("p{i}"), rng.random_range(0.0..3000.0), rng.random_range(0.0..3000.0)).unwrap();
        }
        let cells = grid_stats(&g, &vec![0.5; n], side).unwrap();
        prop_assert_eq!(cells.iter().map(|c| c.node_count).sum::<usize>(), n);
        let area = (side / 1000.0).powi(2);
        let total: f64 = cells.iter().map(|c| c.intersection_density * area).sum();
        prop_assert!((total - n as f64).abs() < 1e-9 * n as f64);
        for c in &cells {
            prop_assert_eq!(c.empty, c.node_count == 0);
            prop_assert_eq!(c.median_closeness.is_some(), c.node_count > 0);
        }
    }
}
