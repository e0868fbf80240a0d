use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rayon::prelude::*;

use super::StreetGraph;
use crate::{Error, Result};

/// Closeness `C(u) = (n_c − 1) / Σ_v d(v, u)` over the connected component of
/// `u` (size `n_c`), with length-weighted shortest paths. Isolated nodes get 0.
pub fn closeness_all(graph: &StreetGraph) -> Result<Vec<f64>> {
    if let Some(e) = graph.edges().iter().find(|e| !(e.length >= 0.0) || !e.length.is_finite()) {
        return Err(Error::Graph(format!(
            "edge {}-{} has invalid length {}",
            graph.nodes()[e.u].id,
            graph.nodes()[e.v].id,
            e.length
        )));
    }
    let mut g: UnGraph<(), f64> = UnGraph::with_capacity(graph.node_count(), graph.edge_count());
    for _ in graph.nodes() {
        g.add_node(());
    }
    for e in graph.edges() {
        g.add_edge(NodeIndex::new(e.u), NodeIndex::new(e.v), e.length);
    }
    let out = (0..graph.node_count())
        .into_par_iter()
        .map(|u| {
            let dist = dijkstra(&g, NodeIndex::new(u), None, |e| *e.weight());
            // fixed summation order, independent of hash iteration
            let mut d: Vec<(usize, f64)> = dist.into_iter().map(|(k, v)| (k.index(), v)).collect();
            d.sort_unstable_by_key(|&(k, _)| k);
            let total: f64 = d.iter().map(|&(_, v)| v).sum();
            if d.len() <= 1 || total <= 0.0 {
                0.0
            } else {
                (d.len() - 1) as f64 / total
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(lengths: &[f64]) -> StreetGraph {
        let mut g = StreetGraph::default();
        for i in 0..=lengths.len() {
            g.add_node(format!("n{i}"), i as f64, 0.0).unwrap();
        }
        for (i, &l) in lengths.iter().enumerate() {
            g.add_edge(i, i + 1, Some(l), None).unwrap();
        }
        g
    }

    #[test]
    fn single_edge() {
        assert_eq!(closeness_all(&path(&[100.0])).unwrap(), vec![0.01, 0.01]);
    }

    #[test]
    fn unit_path_of_three() {
        let c = closeness_all(&path(&[1.0, 1.0])).unwrap();
        assert_eq!(c[1], 1.0);
        assert_eq!(c[0], 2.0 / 3.0);
        assert_eq!(c[2], 2.0 / 3.0);
    }

    #[test]
    fn isolated_and_components() {
        let mut g = path(&[2.0]);
        g.add_node("lonely", 9.0, 9.0).unwrap();
        let c = closeness_all(&g).unwrap();
        assert_eq!(c, vec![0.5, 0.5, 0.0]);
    }
}
