//! Node/subgraph contrastive network used for attribute anomaly scoring and
//! for the embeddings the topology detector compares.

mod grad;
mod model;
mod sampling;
mod train;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use grad::{batch_loss, gradients, Gradients};
pub use model::{bce_loss, discriminate, embed_all, encode_node, encode_subgraph, score_pair, ModelParams, PairScore};
pub use sampling::{rwr_sample, sample_pair, step_budget, ContrastPair};
pub use train::{initial_params, train, Adam, TrainConfig, Trained};

/// On-disk model record; matrices are row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub d: usize,
    pub d_prime: usize,
    pub gcn_weight: Vec<f64>,
    pub bilinear_weight: Vec<f64>,
    pub config: TrainConfig,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new<T: Scalar>(params: &ModelParams<T>, config: &TrainConfig) -> Self {
        let flat = |m: &Array2<T>| m.iter().map(|v| v.as_f64()).collect();
        Checkpoint {
            d: params.input_dim(),
            d_prime: params.hidden_dim(),
            gcn_weight: flat(&params.gcn_weight),
            bilinear_weight: flat(&params.bilinear_weight),
            config: config.clone(),
            seed: config.seed,
        }
    }

    pub fn params<T: Scalar>(&self) -> Result<ModelParams<T>> {
        let build = |rows, cols, v: &[f64]| {
            Array2::from_shape_vec((rows, cols), v.iter().map(|&x| T::of(x)).collect())
                .map_err(|e| Error::Shape(format!("checkpoint: {e}")))
        };
        Ok(ModelParams {
            gcn_weight: build(self.d, self.d_prime, &self.gcn_weight)?,
            bilinear_weight: build(self.d_prime, self.d_prime, &self.bilinear_weight)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let w = crate::io::create(path)?;
        serde_json::to_writer(w, self).map_err(|e| Error::json(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_reader(crate::io::open(path)?).map_err(|e| Error::json(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ModelParams::<f64>::glorot(7, 3, &mut rng);
        let cfg = TrainConfig::default();
        let ck = Checkpoint::new(&p, &cfg);
        let text = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(back.params::<f64>().unwrap(), p);
        let mut bad = back;
        bad.gcn_weight.pop();
        assert!(matches!(bad.params::<f64>(), Err(Error::Shape(_))));
    }
}
