//! Anomaly detection on attributed networks.
//!
//! Two detectors run side by side and are fused into one score per node:
//!
//! - a topology detector that peels the graph into k-cores for increasing `k`,
//!   splits each core into connected substructures and scores members by the
//!   reciprocal of the substructure's average embedding similarity, scaled by
//!   its size;
//! - an attribute detector that trains a one-layer graph-convolution encoder
//!   with a bilinear node/subgraph discriminator and scores each node by how
//!   poorly it agrees with its own neighbourhood.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the experiment pipeline uses.

pub mod contrast;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod injector;
pub mod io;
pub mod metrics;
pub mod regions;
pub mod scalar;
pub mod scoring;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use contrast::{ContrastPair, ModelParams, PairScore, TrainConfig, Trained};
pub use experiment::{run_experiment, ExperimentConfig, SimilaritySource, StageSeeds};
pub use graph::{AttributedGraph, LoadStats};
pub use injector::{AnomalyKind, GroundTruth, InjectionConfig, InjectionLog};
pub use metrics::EvalReport;
pub use regions::{RoundSchedule, Substructure};
pub use scoring::{FusionConfig, FusionStrategy, ScoreTable};

/// Attributed graph with double-precision attributes.
pub type Graph = AttributedGraph<f64>;
/// Contrastive model parameters in double precision.
pub type Params = ModelParams<f64>;
/// Per-node score table in double precision.
pub type Scores = ScoreTable<f64>;
/// Single-precision graph, for memory-constrained runs.
pub type Graph32 = AttributedGraph<f32>;
/// Single-precision model parameters.
pub type Params32 = ModelParams<f32>;
