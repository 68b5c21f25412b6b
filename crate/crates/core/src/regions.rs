//! Region proposal: k-cores for increasing `k`, split into connected
//! substructures.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::graph::AttributedGraph;
use crate::scalar::Scalar;

/// A connected group of nodes inside a k-core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Substructure {
    /// Sorted member ids.
    pub members: Vec<usize>,
    pub k: usize,
    /// Mean pairwise embedding similarity, filled in by scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_similarity: Option<f64>,
}

impl Substructure {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.len() * self.len().saturating_sub(1) / 2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub k: usize,
    pub substructures: Vec<Substructure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSchedule {
    pub average_degree: f64,
    pub k_start: usize,
    pub rounds: Vec<Round>,
}

impl RoundSchedule {
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }
}

/// Core number of every node (Batagelj-Zaversnik bucket peeling, O(n + m)).
pub fn core_numbers<T: Scalar>(graph: &AttributedGraph<T>) -> Vec<usize> {
    let n = graph.node_count();
    let mut degree: Vec<usize> = (0..n).map(|v| graph.degree(v)).collect();
    let max_deg = degree.iter().copied().max().unwrap_or(0);

    // bin[d] = start of the block of nodes with current degree d in `order`
    let mut bin = vec![0usize; max_deg + 2];
    for &d in &degree {
        bin[d + 1] += 1;
    }
    for d in 1..bin.len() {
        bin[d] += bin[d - 1];
    }
    let mut pos = vec![0usize; n];
    let mut order = vec![0usize; n];
    let mut next = bin.clone();
    for v in 0..n {
        pos[v] = next[degree[v]];
        order[pos[v]] = v;
        next[degree[v]] += 1;
    }

    for i in 0..n {
        let v = order[i];
        for &u in graph.neighbors(v) {
            if degree[u] > degree[v] {
                let du = degree[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = order[pw];
                if u != w {
                    order[pu] = w;
                    pos[w] = pu;
                    order[pw] = u;
                    pos[u] = pw;
                }
                bin[du] += 1;
                degree[u] -= 1;
            }
        }
    }
    degree
}

/// Maximal node set in which every node keeps at least `k` neighbours,
/// sorted by id. Empty when no such set exists.
pub fn k_core<T: Scalar>(graph: &AttributedGraph<T>, k: usize) -> Vec<usize> {
    core_members(&core_numbers(graph), k)
}

fn core_members(cores: &[usize], k: usize) -> Vec<usize> {
    cores
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c >= k)
        .map(|(v, _)| v)
        .collect()
}

/// Connected components of the subgraph induced by `core_nodes`, ordered by
/// smallest member.
pub fn connected_substructures<T: Scalar>(
    graph: &AttributedGraph<T>,
    core_nodes: &[usize],
    k: usize,
) -> Vec<Substructure> {
    let n = graph.node_count();
    let mut inside = vec![false; n];
    for &v in core_nodes {
        inside[v] = true;
    }
    let mut seen = vec![false; n];
    let mut starts: Vec<usize> = core_nodes.to_vec();
    starts.sort_unstable();
    starts.dedup();

    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for s in starts {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        queue.push_back(s);
        let mut members = Vec::new();
        while let Some(v) = queue.pop_front() {
            members.push(v);
            for &u in graph.neighbors(v) {
                if inside[u] && !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        members.sort_unstable();
        out.push(Substructure {
            members,
            k,
            avg_similarity: None,
        });
    }
    out
}

/// Runs rounds `k = ceil(avg degree), +1, ...` until the k-core is empty.
/// Singleton components are dropped since they contain no node pair.
pub fn propose_regions<T: Scalar>(graph: &AttributedGraph<T>) -> RoundSchedule {
    let average_degree = graph.average_degree();
    let k_start = average_degree.ceil() as usize;
    let cores = core_numbers(graph);
    let mut rounds = Vec::new();
    for k in k_start.. {
        let core = core_members(&cores, k);
        if core.is_empty() {
            break;
        }
        let substructures = connected_substructures(graph, &core, k)
            .into_iter()
            .filter(|s| s.len() >= 2)
            .collect();
        rounds.push(Round { k, substructures });
    }
    RoundSchedule {
        average_degree,
        k_start,
        rounds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> AttributedGraph<f64> {
        AttributedGraph::new(edges.iter().copied(), Array2::zeros((n, 1))).unwrap()
    }

    /// Removes nodes of degree < k until nothing changes.
    fn naive_core(g: &AttributedGraph<f64>, k: usize) -> Vec<usize> {
        let n = g.node_count();
        let mut alive = vec![true; n];
        loop {
            let mut changed = false;
            for v in 0..n {
                if alive[v] && g.neighbors(v).iter().filter(|&&u| alive[u]).count() < k {
                    alive[v] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (0..n).filter(|&v| alive[v]).collect()
    }

    #[test]
    fn triangle_with_pendant() {
        let g = graph(4, &[(0, 1), (1, 2), (0, 2), (2, 3)]);
        assert_eq!(k_core(&g, 2), vec![0, 1, 2]);
        assert_eq!(k_core(&g, 0), vec![0, 1, 2, 3]);
        assert!(k_core(&g, 4).is_empty());
        assert_eq!(core_numbers(&g), vec![2, 2, 2, 1]);
    }

    #[test]
    fn components_of_two_triangles() {
        let g = graph(7, &[(0, 1), (1, 2), (0, 2), (4, 5), (5, 6), (4, 6), (2, 3)]);
        let subs = connected_substructures(&g, &[6, 5, 4, 0, 1, 2], 2);
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0].members, vec![0, 1, 2]);
        assert_eq!(subs[1].members, vec![4, 5, 6]);
        assert!(connected_substructures(&g, &[], 2).is_empty());
        let whole = connected_substructures(&g, &[0, 1, 2, 3], 1);
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].members, vec![0, 1, 2, 3]);
    }

    #[test]
    fn edgeless_graph_gives_single_empty_round() {
        let g = graph(5, &[]);
        let s = propose_regions(&g);
        assert_eq!(s.k_start, 0);
        assert_eq!(s.round_count(), 1);
        assert!(s.rounds[0].substructures.is_empty());
    }

    #[test]
    fn clique_survives_every_round_up_to_its_size() {
        // sparse ring of 60 plus a 10-clique on nodes 0..10; avg degree < 4
        let mut edges: Vec<(usize, usize)> = (0..60).map(|i| (i, (i + 1) % 60)).collect();
        for u in 0..10 {
            for v in u + 1..10 {
                edges.push((u, v));
            }
        }
        let g = graph(60, &edges);
        let s = propose_regions(&g);
        assert_eq!(s.k_start, (g.average_degree()).ceil() as usize);
        assert_eq!(s.rounds.last().unwrap().k, 9);
        for round in &s.rounds {
            let holder = round
                .substructures
                .iter()
                .find(|c| c.members.contains(&0))
                .expect("clique present");
            assert!((0..10).all(|v| holder.members.contains(&v)));
        }
    }

    proptest! {
        #[test]
        fn k_core_matches_naive_peeling(
            n in 1usize..40,
            edges in prop::collection::vec((0usize..40, 0usize..40), 0..200),
        ) {
            let edges: Vec<_> = edges.into_iter().filter(|&(u, v)| u < n && v < n).collect();
            let g = graph(n, &edges);
            let mut prev = k_core(&g, 0);
            prop_assert_eq!(prev.len(), n);
            for k in 0..=n {
                let core = k_core(&g, k);
                prop_assert_eq!(&core, &naive_core(&g, k));
                prop_assert!(core.iter().all(|v| prev.contains(v)));
                prev = core;
            }
        }

        #[test]
        fn reported_substructures_meet_degree_bound(
            n in 2usize..40,
            edges in prop::collection::vec((0usize..40, 0usize..40), 0..200),
        ) {
            let edges: Vec<_> = edges.into_iter().filter(|&(u, v)| u < n && v < n).collect();
            let g = graph(n, &edges);
            let s = propose_regions(&g);
            prop_assert_eq!(&s, &propose_regions(&g));
            for (i, round) in s.rounds.iter().enumerate() {
                prop_assert_eq!(round.k, s.k_start + i);
                for sub in &round.substructures {
                    prop_assert!(sub.len() >= 2);
                    for &v in &sub.members {
                        let inner = g.neighbors(v).iter().filter(|u| sub.members.binary_search(u).is_ok()).count();
                        prop_assert!(inner >= round.k);
                    }
                }
            }
        }
    }
}
