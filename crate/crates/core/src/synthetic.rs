//! Planted-community attributed graphs for benchmarks without external data.
//!
//! Nodes are split evenly into communities. Most edges stay inside a
//! community, and each community has a prototype set of active binary
//! attributes that its members mostly share.

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommunityGraphConfig {
    pub nodes: usize,
    pub communities: usize,
    pub average_degree: f64,
    /// Probability that an edge stays inside its community.
    pub intra_prob: f64,
    pub attribute_dim: usize,
    /// Active attributes per community prototype.
    pub prototype_size: usize,
    /// Chance a member keeps each prototype attribute.
    pub keep_prob: f64,
    /// Chance of each non-prototype attribute switching on.
    pub noise_prob: f64,
    pub seed: u64,
}

impl Default for CommunityGraphConfig {
    fn default() -> Self {
        CommunityGraphConfig {
            nodes: 500,
            communities: 5,
            average_degree: 4.0,
            intra_prob: 0.9,
            attribute_dim: 100,
            prototype_size: 12,
            keep_prob: 0.8,
            noise_prob: 0.02,
            seed: 0,
        }
    }
}

impl CommunityGraphConfig {
    pub fn community_of(&self, node: usize) -> usize {
        node * self.communities / self.nodes
    }
}

pub fn community_graph<T: Scalar>(config: &CommunityGraphConfig) -> Result<AttributedGraph<T>> {
    let n = config.nodes;
    if n < 2 || config.communities == 0 || config.communities > n {
        return Err(Error::Config(format!(
            "need at least 2 nodes and 1..=n communities, got n={n}, communities={}",
            config.communities
        )));
    }
    if config.prototype_size > config.attribute_dim {
        return Err(Error::Config("prototype_size exceeds attribute_dim".into()));
    }
    let target_edges = (config.average_degree * n as f64 / 2.0).round() as usize;
    if target_edges > n * (n - 1) / 2 {
        return Err(Error::Config("average degree too high for node count".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let members: Vec<Vec<usize>> = {
        let mut m = vec![Vec::new(); config.communities];
        for v in 0..n {
            m[config.community_of(v)].push(v);
        }
        m
    };

    let mut edges = std::collections::BTreeSet::new();
    let mut attempts = 0usize;
    while edges.len() < target_edges {
        attempts += 1;
        if attempts > 100 * target_edges + 1000 {
            return Err(Error::Config("could not place the requested edges".into()));
        }
        let u = rng.gen_range(0..n);
        let v = if rng.gen::<f64>() < config.intra_prob {
            let own = &members[config.community_of(u)];
            own[rng.gen_range(0..own.len())]
        } else {
            rng.gen_range(0..n)
        };
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }

    let prototypes: Vec<Vec<usize>> = (0..config.communities)
        .map(|_| index::sample(&mut rng, config.attribute_dim, config.prototype_size).into_vec())
        .collect();
    let mut attrs = Array2::<T>::zeros((n, config.attribute_dim));
    for v in 0..n {
        let proto = &prototypes[config.community_of(v)];
        for j in 0..config.attribute_dim {
            let p = if proto.contains(&j) {
                config.keep_prob
            } else {
                config.noise_prob
            };
            if rng.gen::<f64>() < p {
                attrs[[v, j]] = T::one();
            }
        }
    }
    AttributedGraph::new(edges, attrs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hits_requested_size_and_degree() {
        let cfg = CommunityGraphConfig::default();
        let g: AttributedGraph<f64> = community_graph(&cfg).unwrap();
        assert_eq!(g.node_count(), 500);
        assert!((g.average_degree() - 4.0).abs() < 0.01);
        let intra = g
            .edges()
            .iter()
            .filter(|&&(u, v)| cfg.community_of(u) == cfg.community_of(v))
            .count();
        assert!(intra as f64 / g.edge_count() as f64 > 0.8);
        let again: AttributedGraph<f64> = community_graph(&cfg).unwrap();
        assert_eq!(g, again);
    }
}
