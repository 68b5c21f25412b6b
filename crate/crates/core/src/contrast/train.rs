use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::gradients;
use super::model::ModelParams;
use super::sampling::sample_pair;
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Embedding width `d'`.
    pub hidden_dim: usize,
    /// Nodes per sampled subgraph, anchor included.
    pub subgraph_size: usize,
    /// Encoder depth; only a single layer is supported.
    pub layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Sampling rounds averaged at inference time.
    pub rounds_attr: usize,
    pub seed: u64,
    pub rwr_restart_prob: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 64,
            subgraph_size: 4,
            layers: 1,
            learning_rate: 0.003,
            epochs: 100,
            batch_size: 300,
            rounds_attr: 256,
            seed: 0,
            rwr_restart_prob: 0.15,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.subgraph_size < 2 {
            return fail(format!("subgraph_size must be at least 2, got {}", self.subgraph_size));
        }
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be positive".into());
        }
        if self.layers != 1 {
            return fail(format!("only a single encoder layer is supported, got {}", self.layers));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(self.rwr_restart_prob > 0.0 && self.rwr_restart_prob < 1.0) {
            return fail(format!(
                "rwr_restart_prob must lie in (0, 1), got {}",
                self.rwr_restart_prob
            ));
        }
        Ok(())
    }
}

/// Adam with the usual defaults: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    step: i32,
    moments: Vec<(Array2<T>, Array2<T>)>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(learning_rate: f64, shapes: &[(usize, usize)]) -> Self {
        Adam {
            lr: T::of(learning_rate),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            step: 0,
            moments: shapes.iter().map(|&s| (Array2::zeros(s), Array2::zeros(s))).collect(),
        }
    }

    /// Applies one update; `params` and `grads` pair up with the shapes
    /// given at construction.
    pub fn update(&mut self, params: &mut [&mut Array2<T>], grads: &[&Array2<T>]) {
        self.step += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.step);
        let c2 = one - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.moments.iter_mut()) {
            ndarray::Zip::from(&mut **p)
                .and(*g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = self.beta1 * *m + (one - self.beta1) * g;
                    *v = self.beta2 * *v + (one - self.beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
    }
}

/// Trained parameters plus the per-epoch loss curve.
#[derive(Clone, Debug)]
pub struct Trained<T> {
    pub params: ModelParams<T>,
    /// Entry `e` is the mean over epoch `e`'s batches of the batch loss
    /// divided by the batch's pair count.
    pub loss_curve: Vec<f64>,
}

impl<T: Scalar> Trained<T> {
    pub fn write_loss_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,mean_batch_loss")?;
        for (e, l) in self.loss_curve.iter().enumerate() {
            writeln!(w, "{e},{l}")?;
        }
        Ok(())
    }
}

/// Trains the encoder and discriminator. Each epoch shuffles the nodes into
/// batches (the final short batch is kept), samples a fresh positive and
/// negative subgraph per target and takes one Adam step per batch.
pub fn train<T: Scalar>(graph: &AttributedGraph<T>, config: &TrainConfig) -> Result<Trained<T>> {
    config.validate()?;
    let n = graph.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::glorot(graph.attribute_dim(), config.hidden_dim, &mut rng);
    let mut adam = Adam::new(
        config.learning_rate,
        &[params.gcn_weight.dim(), params.bilinear_weight.dim()],
    );
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let pairs = chunk
                .iter()
                .map(|&t| sample_pair(graph, t, config.subgraph_size, config.rwr_restart_prob, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let grads = gradients(&params, graph, &pairs)?;
            let loss = grads.loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b, loss });
            }
            adam.update(
                &mut [&mut params.gcn_weight, &mut params.bilinear_weight],
                &[&grads.gcn_weight, &grads.bilinear_weight],
            );
            if !params.is_finite() {
                return Err(Error::Divergence { epoch, batch: b, loss });
            }
            epoch_loss += loss / pairs.len() as f64;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        loss_curve.push(mean);
    }

    Ok(Trained { params, loss_curve })
}

/// Initial parameters `train` starts from for this config and input width.
pub fn initial_params<T: Scalar>(input_dim: usize, config: &TrainConfig) -> ModelParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    ModelParams::glorot(input_dim, config.hidden_dim, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy(seed: u64) -> AttributedGraph<f64> {
        // two communities with distinct attribute profiles
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let attrs = Array2::from_shape_fn((n, 6), |(i, j)| {
            let base = if (i < 15) == (j < 3) { 1.0 } else { 0.0 };
            base + rng.gen_range(-0.1..0.1)
        });
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if (u < 15) == (v < 15) { 0.3 } else { 0.02 };
                if rng.gen::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        AttributedGraph::new(edges, attrs).unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            hidden_dim: 8,
            epochs,
            batch_size: 8,
            learning_rate: 0.01,
            seed: 42,
            ..Default::default()
        }
    }

    #[test]
    fn loss_decreases_on_toy_graph() {
        let g = toy(1);
        let t = train(&g, &cfg(50)).unwrap();
        assert_eq!(t.loss_curve.len(), 50);
        let head: f64 = t.loss_curve[..5].iter().sum::<f64>() / 5.0;
        let tail: f64 = t.loss_curve[45..].iter().sum::<f64>() / 5.0;
        assert!(tail < head, "{head} -> {tail}");
        assert!(t.loss_curve[49] < t.loss_curve[0]);
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let g = toy(2);
        let c = cfg(0);
        let t = train(&g, &c).unwrap();
        assert_eq!(t.params, initial_params(g.attribute_dim(), &c));
        assert!(t.loss_curve.is_empty());
    }

    #[test]
    fn same_seed_same_bits() {
        let g = toy(3);
        let a = train(&g, &cfg(5)).unwrap();
        let b = train(&g, &cfg(5)).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.loss_curve, b.loss_curve);
    }

    #[test]
    fn runs_in_single_precision() {
        let g = toy(4);
        let g32 = AttributedGraph::new(g.edges().iter().copied(), g.attributes().mapv(|v| v as f32)).unwrap();
        let t = train(&g32, &cfg(3)).unwrap();
        assert!(t.params.is_finite());
    }

    #[test]
    fn config_validation() {
        let g = toy(5);
        for bad in [
            TrainConfig {
                subgraph_size: 1,
                ..cfg(1)
            },
            TrainConfig {
                learning_rate: 0.0,
                ..cfg(1)
            },
            TrainConfig { layers: 2, ..cfg(1) },
            TrainConfig {
                hidden_dim: 0,
                ..cfg(1)
            },
            TrainConfig {
                rwr_restart_prob: 1.0,
                ..cfg(1)
            },
        ] {
            assert!(matches!(train(&g, &bad), Err(Error::Config(_))));
        }
    }

    #[test]
    fn divergence_reported() {
        let g = toy(6);
        let huge = g.with_attributes(g.attributes().mapv(|v| v * 1e300)).unwrap();
        let err = train(&huge, &cfg(2)).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
        assert_eq!(err.exit_code(), 4);
    }
}
