use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::scalar::{relu, sigmoid, Scalar};

/// Shared encoder weight (`d x d'`) and bilinear discriminator weight
/// (`d' x d'`).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub gcn_weight: Array2<T>,
    pub bilinear_weight: Array2<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        ModelParams {
            gcn_weight: Array2::zeros((input_dim, hidden_dim)),
            bilinear_weight: Array2::zeros((hidden_dim, hidden_dim)),
        }
    }

    /// Glorot-uniform initialisation of both matrices.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut fill = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || T::of(rng.gen_range(-limit..limit)))
        };
        let gcn_weight = fill(input_dim, hidden_dim);
        let bilinear_weight = fill(hidden_dim, hidden_dim);
        ModelParams {
            gcn_weight,
            bilinear_weight,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.gcn_weight.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.gcn_weight.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.gcn_weight
            .iter()
            .chain(self.bilinear_weight.iter())
            .all(|v| v.is_finite())
    }
}

/// `x W`, skipping zero entries of `x` (attribute rows are often sparse).
pub(crate) fn project<T: Scalar>(x: ArrayView1<'_, T>, weight: &Array2<T>) -> Array1<T> {
    let mut out = Array1::zeros(weight.ncols());
    for (k, &xk) in x.iter().enumerate() {
        if xk != T::zero() {
            out.scaled_add(xk, &weight.row(k));
        }
    }
    out
}

/// Forward state of one subgraph, kept for back-propagation.
pub(crate) struct SubgraphForward<T> {
    /// `Â H0`, with the anchor row of `H0` zeroed when masked.
    pub aggregated: Array2<T>,
    pub pre_activation: Array2<T>,
    pub embeddings: Array2<T>,
    pub readout: Array1<T>,
}

pub(crate) fn forward_subgraph<T: Scalar>(
    params: &ModelParams<T>,
    graph: &AttributedGraph<T>,
    nodes: &[usize],
    mask_anchor: bool,
) -> Result<SubgraphForward<T>> {
    if nodes.is_empty() {
        return Err(Error::Contract("cannot encode an empty subgraph".into()));
    }
    if graph.attribute_dim() != params.input_dim() {
        return Err(Error::Shape(format!(
            "graph has {} attributes, model expects {}",
            graph.attribute_dim(),
            params.input_dim()
        )));
    }
    let c = nodes.len();
    let adj = graph.normalized_adjacency(nodes)?;
    let d = graph.attribute_dim();
    let mut aggregated = Array2::<T>::zeros((c, d));
    for (j, &v) in nodes.iter().enumerate() {
        if mask_anchor && j == 0 {
            continue;
        }
        let row = graph.attribute_row(v);
        for a in 0..c {
            let w = adj[[a, j]];
            if w != T::zero() {
                aggregated.row_mut(a).scaled_add(w, &row);
            }
        }
    }
    let mut pre_activation = Array2::<T>::zeros((c, params.hidden_dim()));
    for a in 0..c {
        pre_activation
            .row_mut(a)
            .assign(&project(aggregated.row(a), &params.gcn_weight));
    }
    let embeddings = pre_activation.mapv(relu);
    let readout = embeddings
        .mean_axis(ndarray::Axis(0))
        .expect("subgraph has at least one row");
    Ok(SubgraphForward {
        aggregated,
        pre_activation,
        embeddings,
        readout,
    })
}

/// One graph-convolution layer over the subgraph on `nodes` followed by a
/// mean readout. Returns the per-node embeddings and the readout vector.
pub fn encode_subgraph<T: Scalar>(
    params: &ModelParams<T>,
    graph: &AttributedGraph<T>,
    nodes: &[usize],
    mask_anchor: bool,
) -> Result<(Array2<T>, Array1<T>)> {
    let f = forward_subgraph(params, graph, nodes, mask_anchor)?;
    Ok((f.embeddings, f.readout))
}

/// `ReLU(x W)` with the encoder's weight.
pub fn encode_node<T: Scalar>(params: &ModelParams<T>, attributes: ArrayView1<'_, T>) -> Array1<T> {
    project(attributes, &params.gcn_weight).mapv(relu)
}

pub(crate) fn bilinear_logit<T: Scalar>(params: &ModelParams<T>, z: ArrayView1<'_, T>, e: ArrayView1<'_, T>) -> T {
    z.dot(&params.bilinear_weight.dot(&e))
}

/// `sigmoid(z W~ e^T)`.
pub fn discriminate<T: Scalar>(params: &ModelParams<T>, z: ArrayView1<'_, T>, e: ArrayView1<'_, T>) -> T {
    sigmoid(bilinear_logit(params, z, e))
}

/// Discriminator outputs for the positive and negative member of one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore<T> {
    pub s_pos: T,
    pub s_neg: T,
}

/// Binary cross-entropy summed over both members of every pair: positives
/// carry label 1, negatives label 0.
pub fn bce_loss<T: Scalar>(scores: &[PairScore<T>]) -> T {
    scores.iter().map(|p| -(p.s_pos.ln() + (T::one() - p.s_neg).ln())).sum()
}

/// Row `i` is `encode_node` of node `i`.
pub fn embed_all<T: Scalar>(params: &ModelParams<T>, graph: &AttributedGraph<T>) -> Array2<T> {
    let mut out = Array2::zeros((graph.node_count(), params.hidden_dim()));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        row.assign(&encode_node(params, graph.attribute_row(i)));
    }
    out
}

/// Scores one sampled pair with frozen parameters.
pub fn score_pair<T: Scalar>(
    params: &ModelParams<T>,
    graph: &AttributedGraph<T>,
    pair: &super::ContrastPair,
) -> Result<PairScore<T>> {
    let z = encode_node(params, graph.attribute_row(pair.target));
    let (_, pos) = encode_subgraph(params, graph, &pair.positive, true)?;
    let (_, neg) = encode_subgraph(params, graph, &pair.negative, true)?;
    Ok(PairScore {
        s_pos: discriminate(params, z.view(), pos.view()),
        s_neg: discriminate(params, z.view(), neg.view()),
    })
}
