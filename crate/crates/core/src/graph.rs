//! Undirected attributed graph with dense node ids `0..n`.
//!
//! Adjacency is kept in compressed sparse row form with sorted neighbour
//! lists, so `has_edge` is a binary search and iteration order is fixed.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bookkeeping from graph construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub dropped_self_loops: usize,
    pub duplicate_edges: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributedGraph<T> {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    /// Unordered edges stored as `(u, v)` with `u < v`, sorted.
    edges: Vec<(usize, usize)>,
    attributes: Array2<T>,
    stats: LoadStats,
}

impl<T: Scalar> AttributedGraph<T> {
    /// Builds a graph over `attributes.nrows()` nodes.
    ///
    /// Edges are symmetrised and deduplicated; self-loops are dropped and
    /// counted in [`LoadStats`].
    pub fn new<I>(edges: I, attributes: Array2<T>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = attributes.nrows();
        if n == 0 {
            return Err(Error::Shape("a graph needs at least one node".into()));
        }
        let mut stats = LoadStats::default();
        let mut pairs = Vec::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeRange {
                        id: id as i64,
                        node_count: n,
                    });
                }
            }
            if u == v {
                stats.dropped_self_loops += 1;
                continue;
            }
            pairs.push((u.min(v), u.max(v)));
        }
        let raw = pairs.len();
        pairs.sort_unstable();
        pairs.dedup();
        stats.duplicate_edges = raw - pairs.len();

        let mut graph = Self::from_sorted_edges(n, pairs, attributes);
        graph.stats = stats;
        Ok(graph)
    }

    fn from_sorted_edges(n: usize, edges: Vec<(usize, usize)>, attributes: Array2<T>) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0usize; offsets[n]];
        for &(u, v) in &edges {
            targets[fill[u]] = v;
            fill[u] += 1;
            targets[fill[v]] = u;
            fill[v] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        AttributedGraph {
            offsets,
            targets,
            edges,
            attributes,
            stats: LoadStats::default(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.attributes.nrows()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.ncols()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.targets[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn attributes(&self) -> &Array2<T> {
        &self.attributes
    }

    pub fn attribute_row(&self, node: usize) -> ArrayView1<'_, T> {
        self.attributes.row(node)
    }

    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    /// Mean degree `2m / n`.
    pub fn average_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }

    /// Same topology, new attribute matrix.
    pub fn with_attributes(&self, attributes: Array2<T>) -> Result<Self> {
        if attributes.nrows() != self.node_count() {
            return Err(Error::Shape(format!(
                "attribute matrix has {} rows, graph has {} nodes",
                attributes.nrows(),
                self.node_count()
            )));
        }
        Ok(AttributedGraph {
            attributes,
            ..self.clone()
        })
    }

    /// Same attributes, new edge set.
    pub fn with_edges<I>(&self, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::new(edges, self.attributes.clone())
    }

    /// Symmetrically normalised adjacency `D^-1/2 (A + I) D^-1/2` of the
    /// subgraph induced by `nodes`, in the given node order.
    pub fn normalized_adjacency(&self, nodes: &[usize]) -> Result<Array2<T>> {
        if nodes.is_empty() {
            return Err(Error::Contract("normalized adjacency of an empty node subset".into()));
        }
        if let Some(&bad) = nodes.iter().find(|&&v| v >= self.node_count()) {
            return Err(Error::NodeRange {
                id: bad as i64,
                node_count: self.node_count(),
            });
        }
        let c = nodes.len();
        let mut adj = Array2::<T>::eye(c);
        for a in 0..c {
            for b in (a + 1)..c {
                if self.has_edge(nodes[a], nodes[b]) {
                    adj[[a, b]] = T::one();
                    adj[[b, a]] = T::one();
                }
            }
        }
        let inv_sqrt: Vec<T> = adj.rows().into_iter().map(|r| T::one() / r.sum().sqrt()).collect();
        for a in 0..c {
            for b in 0..c {
                adj[[a, b]] = adj[[a, b]] * inv_sqrt[a] * inv_sqrt[b];
            }
        }
        Ok(adj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn zeros(n: usize) -> Array2<f64> {
        Array2::zeros((n, 2))
    }

    #[test]
    fn path_graph_basics() {
        let g = AttributedGraph::new([(0, 1), (1, 2)], zeros(3)).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        assert!(!g.has_edge(0, 2));
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn self_loops_dropped_and_counted() {
        let g = AttributedGraph::new([(0, 1), (1, 1), (1, 0), (2, 1)], zeros(3)).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.stats().dropped_self_loops, 1);
        assert_eq!(g.stats().duplicate_edges, 1);
        assert!(!g.has_edge(1, 1));
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let err = AttributedGraph::new([(0, 3)], zeros(3)).unwrap_err();
        assert!(matches!(err, Error::NodeRange { id: 3, .. }));
    }

    #[test]
    fn average_degree_small_cases() {
        let tri = AttributedGraph::new([(0, 1), (1, 2), (0, 2)], zeros(3)).unwrap();
        assert_eq!(tri.average_degree(), 2.0);
        let edge = AttributedGraph::new([(0, 1)], zeros(2)).unwrap();
        assert_eq!(edge.average_degree(), 1.0);
        let cora_like = 2.0 * 5429.0 / 2708.0;
        assert!((cora_like - 4.0096f64).abs() < 1e-4);
    }

    #[test]
    fn normalized_adjacency_hand_cases() {
        let g = AttributedGraph::new([(0, 1)], zeros(3)).unwrap();
        assert_eq!(g.normalized_adjacency(&[2]).unwrap(), array![[1.0]]);
        let pair = g.normalized_adjacency(&[0, 1]).unwrap();
        for v in pair.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
        assert_eq!(g.normalized_adjacency(&[0, 2]).unwrap(), Array2::<f64>::eye(2));
        assert!(matches!(g.normalized_adjacency(&[]), Err(Error::Contract(_))));
    }

    fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..20).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..60)))
    }

    proptest! {
        #[test]
        fn normalized_adjacency_symmetric_and_bounded(
            (n, edges) in arb_graph(),
            picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8),
        ) {
            let g = AttributedGraph::new(edges, zeros(n)).unwrap();
            let mut subset: Vec<usize> = picks.iter().map(|i| i.index(n)).collect();
            subset.sort_unstable();
            subset.dedup();
            let m = g.normalized_adjacency(&subset).unwrap();
            for a in 0..subset.len() {
                for b in 0..subset.len() {
                    prop_assert_eq!(m[[a, b]], m[[b, a]]);
                    prop_assert!((0.0..=1.0).contains(&m[[a, b]]));
                }
            }
        }

        #[test]
        fn average_degree_is_mean_of_degrees((n, edges) in arb_graph()) {
            let g = AttributedGraph::new(edges, zeros(n)).unwrap();
            let total: usize = (0..n).map(|v| g.degree(v)).sum();
            prop_assert!((g.average_degree() - total as f64 / n as f64).abs() < 1e-12);
        }
    }
}
