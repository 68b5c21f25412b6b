use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::scalar::Scalar;

/// A target node with one positive and one negative subgraph. Each node list
/// starts with its anchor: the target for the positive side, a different
/// random node for the negative side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastPair {
    pub target: usize,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

/// Step budget for a walk collecting `size` nodes: `10 * size * (avg degree + 1)`.
pub fn step_budget(size: usize, average_degree: f64) -> usize {
    (10.0 * size as f64 * (average_degree + 1.0)).ceil() as usize
}

/// Random walk with restart from `anchor`, returning up to `size` distinct
/// nodes in first-visit order with the anchor first.
pub fn rwr_sample<T: Scalar, R: Rng + ?Sized>(
    graph: &AttributedGraph<T>,
    anchor: usize,
    size: usize,
    restart_prob: f64,
    rng: &mut R,
) -> Vec<usize> {
    let mut visited = vec![anchor];
    if size <= 1 || graph.degree(anchor) == 0 {
        return visited;
    }
    let budget = step_budget(size, graph.average_degree());
    let mut current = anchor;
    for _ in 0..budget {
        let nbrs = graph.neighbors(current);
        current = if nbrs.is_empty() || rng.gen::<f64>() < restart_prob {
            anchor
        } else {
            nbrs[rng.gen_range(0..nbrs.len())]
        };
        if !visited.contains(&current) {
            visited.push(current);
            if visited.len() == size {
                break;
            }
        }
    }
    visited
}

/// Samples the positive and negative subgraphs for `target`.
pub fn sample_pair<T: Scalar, R: Rng + ?Sized>(
    graph: &AttributedGraph<T>,
    target: usize,
    size: usize,
    restart_prob: f64,
    rng: &mut R,
) -> Result<ContrastPair> {
    let n = graph.node_count();
    if n < 2 {
        return Err(Error::Contract("negative sampling needs at least two nodes".into()));
    }
    let positive = rwr_sample(graph, target, size, restart_prob, rng);
    let mut other = rng.gen_range(0..n - 1);
    if other >= target {
        other += 1;
    }
    let negative = rwr_sample(graph, other, size, restart_prob, rng);
    Ok(ContrastPair {
        target,
        positive,
        negative,
    })
}
