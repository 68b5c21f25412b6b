//! Per-node anomaly scores and their fusion.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrast::{discriminate, embed_all, encode_subgraph, sample_pair, ModelParams, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::injector::{AnomalyKind, GroundTruth};
use crate::regions::{RoundSchedule, Substructure};
use crate::scalar::Scalar;

/// Lower clamp on a substructure's mean similarity before taking its
/// reciprocal.
pub const SIMILARITY_FLOOR: f64 = 1e-3;

/// Cosine similarity; 0 when either vector has zero norm.
pub fn pair_similarity<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    a.dot(&b) / (na * nb)
}

/// Mean cosine similarity over all unordered member pairs.
///
/// With unit rows `u_i` (zero rows stay zero), the pair sum equals
/// `(|sum u_i|^2 - sum |u_i|^2) / 2`, so this runs in `O(|C| d')`.
pub fn substructure_similarity<T: Scalar>(embeddings: &Array2<T>, sub: &Substructure) -> Result<T> {
    if sub.len() < 2 {
        return Err(Error::Contract(format!(
            "similarity of a substructure with {} member(s)",
            sub.len()
        )));
    }
    let mut total = Array1::<T>::zeros(embeddings.ncols());
    let mut self_terms = T::zero();
    for &v in &sub.members {
        let row = embeddings.row(v);
        let norm = row.dot(&row).sqrt();
        if norm > T::zero() {
            total.scaled_add(T::one() / norm, &row);
            self_terms += T::one();
        }
    }
    let pair_sum = (total.dot(&total) - self_terms) / T::of(2.0);
    Ok(pair_sum / T::usize(sub.pair_count()))
}

/// Fills `avg_similarity` on every substructure of the schedule.
pub fn annotate_similarities<T: Scalar>(schedule: &mut RoundSchedule, embeddings: &Array2<T>) -> Result<()> {
    for round in &mut schedule.rounds {
        for sub in &mut round.substructures {
            sub.avg_similarity = Some(substructure_similarity(embeddings, sub)?.as_f64());
        }
    }
    Ok(())
}

/// Topology score per node: each round contributes `|C| / max(d_C, floor)`
/// for the substructure `C` holding the node (0 when none does), averaged
/// over all rounds.
pub fn topology_scores<T: Scalar>(schedule: &RoundSchedule, embeddings: &Array2<T>, n: usize) -> Result<Vec<T>> {
    let mut scores = vec![T::zero(); n];
    if schedule.rounds.is_empty() {
        return Ok(scores);
    }
    let floor = T::of(SIMILARITY_FLOOR);
    for round in &schedule.rounds {
        for sub in &round.substructures {
            let d = substructure_similarity(embeddings, sub)?.max(floor);
            let value = T::usize(sub.len()) / d;
            for &v in &sub.members {
                scores[v] += value;
            }
        }
    }
    let rounds = T::usize(schedule.round_count());
    for s in &mut scores {
        *s /= rounds;
    }
    Ok(scores)
}

/// Sampling settings for attribute scoring.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttributeSampling {
    pub subgraph_size: usize,
    pub restart_prob: f64,
    pub rounds: usize,
    pub seed: u64,
}

impl AttributeSampling {
    pub fn from_train(config: &TrainConfig, seed: u64) -> Self {
        AttributeSampling {
            subgraph_size: config.subgraph_size,
            restart_prob: config.rwr_restart_prob,
            rounds: config.rounds_attr,
            seed,
        }
    }
}

/// One inference round: `s_neg - s_pos` for every node, with fresh pairs
/// drawn from the round's own rng stream.
pub fn attribute_round<T: Scalar>(
    params: &ModelParams<T>,
    graph: &AttributedGraph<T>,
    sampling: &AttributeSampling,
    round: u64,
) -> Result<Vec<T>> {
    let z = embed_all(params, graph);
    attribute_round_with(params, graph, &z, sampling, round)
}

fn attribute_round_with<T: Scalar>(
    params: &ModelParams<T>,
    graph: &AttributedGraph<T>,
    z: &Array2<T>,
    sampling: &AttributeSampling,
    round: u64,
) -> Result<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    rng.set_stream(round);
    (0..graph.node_count())
        .map(|v| {
            let pair = sample_pair(graph, v, sampling.subgraph_size, sampling.restart_prob, &mut rng)?;
            let (_, pos) = encode_subgraph(params, graph, &pair.positive, true)?;
            let (_, neg) = encode_subgraph(params, graph, &pair.negative, true)?;
            let zv = z.row(v);
            Ok(discriminate(params, zv, neg.view()) - discriminate(params, zv, pos.view()))
        })
        .collect()
}

/// Mean of `sampling.rounds` independent rounds. Rounds run in parallel and
/// are summed in round order.
pub fn attribute_scores<T: Scalar>(
    params: &ModelParams<T>,
    graph: &AttributedGraph<T>,
    sampling: &AttributeSampling,
) -> Result<Vec<T>> {
    let n = graph.node_count();
    if sampling.rounds == 0 {
        return Err(Error::Config("attribute scoring needs at least one round".into()));
    }
    let z = embed_all(params, graph);
    let rounds: Vec<Vec<T>> = (0..sampling.rounds as u64)
        .into_par_iter()
        .map(|r| attribute_round_with(params, graph, &z, sampling, r))
        .collect::<Result<_>>()?;
    let mut total = vec![T::zero(); n];
    for round in &rounds {
        for (t, &a) in total.iter_mut().zip(round) {
            *t += a;
        }
    }
    let count = T::usize(sampling.rounds);
    Ok(total.into_iter().map(|t| t / count).collect())
}

/// Min-max scaling to `[0, 1]`; a constant vector maps to zeros.
pub fn normalize<T: Scalar>(scores: &[T]) -> Vec<T> {
    let Some(&first) = scores.first() else {
        return Vec::new();
    };
    let (lo, hi) = scores
        .iter()
        .fold((first, first), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let span = hi - lo;
    if span == T::zero() {
        return vec![T::zero(); scores.len()];
    }
    scores.iter().map(|&s| (s - lo) / span).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FusionStrategy {
    #[default]
    Weight,
    Max,
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Weight of the attribute score under `Weight` fusion.
    pub alpha: Option<f64>,
    pub strategy: FusionStrategy,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            alpha: Some(0.8),
            strategy: FusionStrategy::Weight,
        }
    }
}

impl FusionConfig {
    pub fn weighted(alpha: f64) -> Self {
        FusionConfig {
            alpha: Some(alpha),
            strategy: FusionStrategy::Weight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.strategy, self.alpha) {
            (FusionStrategy::Weight, None) => Err(Error::Config("weight fusion requires alpha".into())),
            (_, Some(a)) if !(0.0..=1.0).contains(&a) => {
                Err(Error::Config(format!("alpha must lie in [0, 1], got {a}")))
            }
            _ => Ok(()),
        }
    }
}

/// Combines normalised topology and attribute scores.
pub fn fuse<T: Scalar>(topo: &[T], attr: &[T], config: &FusionConfig) -> Result<Vec<T>> {
    config.validate()?;
    if topo.len() != attr.len() {
        return Err(Error::Shape(format!(
            "{} topology scores vs {} attribute scores",
            topo.len(),
            attr.len()
        )));
    }
    let pairs = topo.iter().zip(attr);
    Ok(match config.strategy {
        FusionStrategy::Weight => {
            let a = T::of(config.alpha.expect("validated"));
            pairs.map(|(&t, &s)| (T::one() - a) * t + a * s).collect()
        }
        FusionStrategy::Max => pairs.map(|(&t, &s)| t.max(s)).collect(),
        FusionStrategy::Sum => pairs.map(|(&t, &s)| t + s).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable<T> {
    pub topo_raw: Vec<T>,
    pub attr_raw: Vec<T>,
    /// Normalised topology score.
    pub topo: Vec<T>,
    /// Normalised attribute score.
    pub attr: Vec<T>,
    pub final_score: Vec<T>,
}

impl<T: Scalar> ScoreTable<T> {
    /// Normalises both raw score vectors and fuses them.
    pub fn build(topo_raw: Vec<T>, attr_raw: Vec<T>, fusion: &FusionConfig) -> Result<Self> {
        let topo = normalize(&topo_raw);
        let attr = normalize(&attr_raw);
        let final_score = fuse(&topo, &attr, fusion)?;
        Ok(ScoreTable {
            topo_raw,
            attr_raw,
            topo,
            attr,
            final_score,
        })
    }

    /// Re-fuses the same normalised scores under another fusion setting.
    pub fn refuse(&self, fusion: &FusionConfig) -> Result<Self> {
        Ok(ScoreTable {
            final_score: fuse(&self.topo, &self.attr, fusion)?,
            ..self.clone()
        })
    }

    pub fn len(&self) -> usize {
        self.final_score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.final_score.is_empty()
    }

    /// CSV `node_id,score_topo,score_attr,score_final,label,kind` with the
    /// normalised component scores.
    pub fn write_csv<W: Write>(&self, truth: Option<&GroundTruth>, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node_id,score_topo,score_attr,score_final,label,kind")?;
        for i in 0..self.len() {
            let kind = truth.map_or(AnomalyKind::None, |t| t.kind(i));
            writeln!(
                w,
                "{i},{},{},{},{},{}",
                self.topo[i],
                self.attr[i],
                self.final_score[i],
                u8::from(kind != AnomalyKind::None),
                kind.as_str()
            )?;
        }
        Ok(())
    }

    /// Reads a score CSV back. Raw columns are filled with the stored
    /// normalised values.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<(Self, GroundTruth)> {
        let (mut topo, mut attr, mut fin, mut kinds) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let bad = |message: String| Error::Parse { line: line_no, message };
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (line_no == 1 && line.starts_with("node_id")) {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(format!("expected 6 fields, got {}", f.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map(T::of)
                    .map_err(|_| bad(format!("not a number: {s:?}")))
            };
            if f[0].parse::<usize>().ok() != Some(topo.len()) {
                return Err(bad(format!("expected node id {}", topo.len())));
            }
            topo.push(num(f[1])?);
            attr.push(num(f[2])?);
            fin.push(num(f[3])?);
            kinds.push(AnomalyKind::parse(f[5]).ok_or_else(|| bad(format!("unknown kind {:?}", f[5])))?);
        }
        Ok((
            ScoreTable {
                topo_raw: topo.clone(),
                attr_raw: attr.clone(),
                topo,
                attr,
                final_score: fin,
            },
            GroundTruth::from_kinds(kinds),
        ))
    }
}
