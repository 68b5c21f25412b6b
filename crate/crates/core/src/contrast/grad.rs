//! Hand-derived back-propagation for the contrastive loss.
//!
//! For one target `t` and one of its subgraphs with label `y`:
//!
//! ```text
//! a = x_t W            z = ReLU(a)
//! P = (Â H0) W         E = ReLU(P)         e = mean_rows(E)
//! l = z W~ e^T         loss = softplus(l) - y l
//! ```
//!
//! so `dloss/dl = sigmoid(l) - y`, and the chain rule runs back through the
//! bilinear form, the mean readout, both ReLUs (subgradient 0 at 0) and into
//! the shared `W`.

use ndarray::{Array1, Array2, ArrayView1};

use super::model::{bilinear_logit, forward_subgraph, project, ModelParams};
use super::ContrastPair;
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::scalar::{sigmoid, softplus, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub gcn_weight: Array2<T>,
    pub bilinear_weight: Array2<T>,
    /// Summed BCE loss of the batch.
    pub loss: T,
}

fn add_outer<T: Scalar>(acc: &mut Array2<T>, left: ArrayView1<'_, T>, right: ArrayView1<'_, T>, scale: T) {
    for (k, &lk) in left.iter().enumerate() {
        if lk != T::zero() {
            acc.row_mut(k).scaled_add(lk * scale, &right);
        }
    }
}

fn relu_mask<T: Scalar>(grad: &mut Array1<T>, pre: ArrayView1<'_, T>) {
    for (g, &p) in grad.iter_mut().zip(pre.iter()) {
        if p <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Summed BCE loss of a batch, evaluated straight from logits.
pub fn batch_loss<T: Scalar>(params: &ModelParams<T>, graph: &AttributedGraph<T>, batch: &[ContrastPair]) -> Result<T> {
    let mut loss = T::zero();
    for pair in batch {
        let z = project(graph.attribute_row(pair.target), &params.gcn_weight).mapv(crate::scalar::relu);
        for (nodes, label) in [(&pair.positive, T::one()), (&pair.negative, T::zero())] {
            let f = forward_subgraph(params, graph, nodes, true)?;
            let logit = bilinear_logit(params, z.view(), f.readout.view());
            loss += softplus(logit) - label * logit;
        }
    }
    Ok(loss)
}

/// Exact gradients of the summed BCE loss with respect to both weights.
pub fn gradients<T: Scalar>(
    params: &ModelParams<T>,
    graph: &AttributedGraph<T>,
    batch: &[ContrastPair],
) -> Result<Gradients<T>> {
    if batch.is_empty() {
        return Err(Error::Contract("gradient of an empty batch".into()));
    }
    let hidden = params.hidden_dim();
    let mut d_gcn = Array2::<T>::zeros(params.gcn_weight.raw_dim());
    let mut d_bil = Array2::<T>::zeros(params.bilinear_weight.raw_dim());
    let mut loss = T::zero();

    for pair in batch {
        let x_t = graph.attribute_row(pair.target);
        let pre_node = project(x_t, &params.gcn_weight);
        let z = pre_node.mapv(crate::scalar::relu);
        let mut d_z = Array1::<T>::zeros(hidden);

        for (nodes, label) in [(&pair.positive, T::one()), (&pair.negative, T::zero())] {
            let f = forward_subgraph(params, graph, nodes, true)?;
            let w_e = params.bilinear_weight.dot(&f.readout);
            let logit = z.dot(&w_e);
            loss += softplus(logit) - label * logit;
            let g = sigmoid(logit) - label;

            add_outer(&mut d_bil, z.view(), f.readout.view(), g);
            d_z.scaled_add(g, &w_e);
            let d_e = params.bilinear_weight.t().dot(&z) * g;

            let inv_c = T::one() / T::usize(nodes.len());
            for r in 0..nodes.len() {
                let mut d_pre = &d_e * inv_c;
                relu_mask(&mut d_pre, f.pre_activation.row(r));
                add_outer(&mut d_gcn, f.aggregated.row(r), d_pre.view(), T::one());
            }
        }

        relu_mask(&mut d_z, pre_node.view());
        add_outer(&mut d_gcn, x_t, d_z.view(), T::one());
    }

    Ok(Gradients {
        gcn_weight: d_gcn,
        bilinear_weight: d_bil,
        loss,
    })
}
