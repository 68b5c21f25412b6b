//! End-to-end experiment: inject, train, propose regions, score, fuse,
//! evaluate, and persist every intermediate artifact with a manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contrast::{embed_all, train, Checkpoint, ModelParams, TrainConfig, Trained};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::injector::{self, GroundTruth, InjectionConfig, InjectionLog};
use crate::io;
use crate::metrics::{evaluate, EvalReport, DEFAULT_K_LIST};
use crate::regions::{propose_regions, RoundSchedule};
use crate::scalar::Scalar;
use crate::scoring::{
    annotate_similarities, attribute_scores, topology_scores, AttributeSampling, FusionConfig, ScoreTable,
};

/// What the topology detector compares inside a substructure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimilaritySource {
    #[default]
    Embeddings,
    Raw,
}

/// Seeds for each stochastic stage, derived from one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub injection: u64,
    pub training: u64,
    pub inference: u64,
}

impl StageSeeds {
    pub fn derive(master: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        StageSeeds {
            injection: rng.next_u64(),
            training: rng.next_u64(),
            inference: rng.next_u64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub edges: PathBuf,
    pub attributes: PathBuf,
    /// When set, the edge list uses external ids resolved through this map.
    pub id_map: Option<PathBuf>,
    pub injection: InjectionConfig,
    pub train: TrainConfig,
    pub fusion: FusionConfig,
    pub similarity_source: SimilaritySource,
    pub k_list: Vec<usize>,
    pub output_dir: PathBuf,
    /// Master seed; stage seeds inside `injection` and `train` are
    /// overwritten from it.
    pub seed: u64,
    /// Extra alpha values to report under weight fusion.
    pub alpha_sweep: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            edges: PathBuf::from("edges.txt"),
            attributes: PathBuf::from("attributes.csv"),
            id_map: None,
            injection: InjectionConfig::default(),
            train: TrainConfig::default(),
            fusion: FusionConfig::default(),
            similarity_source: SimilaritySource::Embeddings,
            k_list: DEFAULT_K_LIST.to_vec(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            alpha_sweep: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_reader(io::open(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::derive(self.seed)
    }

    /// Copy with stage seeds filled in from the master seed.
    pub fn resolved(&self) -> Self {
        let seeds = self.seeds();
        let mut cfg = self.clone();
        cfg.injection.seed = seeds.injection;
        cfg.train.seed = seeds.training;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.fusion.validate()?;
        if self.train.rounds_attr == 0 {
            return Err(Error::Config("rounds_attr must be positive".into()));
        }
        if let Some(a) = self.alpha_sweep.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::Config(format!("alpha sweep value {a} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Injection with an rng seeded from `config.seed`.
pub fn inject_stage<T: Scalar>(
    graph: &AttributedGraph<T>,
    config: &InjectionConfig,
) -> Result<(AttributedGraph<T>, GroundTruth, InjectionLog)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    injector::inject_logged(graph, config, &mut rng)
}

/// Contents of `injection.json`: enough to reproduce or audit an injection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub config: InjectionConfig,
    #[serde(flatten)]
    pub log: InjectionLog,
}

/// Vectors compared by the topology detector.
pub fn similarity_vectors<T: Scalar>(
    params: &ModelParams<T>,
    graph: &AttributedGraph<T>,
    source: SimilaritySource,
) -> Array2<T> {
    match source {
        SimilaritySource::Embeddings => embed_all(params, graph),
        SimilaritySource::Raw => graph.attributes().clone(),
    }
}

/// Topology and attribute scores for a trained model, normalised and fused.
/// `schedule` gets its substructure similarities filled in.
pub fn score_stage<T: Scalar>(
    graph: &AttributedGraph<T>,
    params: &ModelParams<T>,
    schedule: &mut RoundSchedule,
    train_config: &TrainConfig,
    inference_seed: u64,
    source: SimilaritySource,
    fusion: &FusionConfig,
) -> Result<ScoreTable<T>> {
    let vectors = similarity_vectors(params, graph, source);
    annotate_similarities(schedule, &vectors).map_err(|e| e.in_stage("regions"))?;
    let topo = topology_scores(schedule, &vectors, graph.node_count()).map_err(|e| e.in_stage("topology"))?;
    let sampling = AttributeSampling::from_train(train_config, inference_seed);
    let attr = attribute_scores(params, graph, &sampling).map_err(|e| e.in_stage("attribute"))?;
    ScoreTable::build(topo, attr, fusion).map_err(|e| e.in_stage("fuse"))
}

/// Everything the pipeline produces, kept in memory.
#[derive(Clone, Debug)]
pub struct PipelineOutput<T> {
    pub config: ExperimentConfig,
    pub graph: AttributedGraph<T>,
    pub truth: GroundTruth,
    pub trained: Trained<T>,
    pub schedule: RoundSchedule,
    pub scores: ScoreTable<T>,
    pub report: EvalReport,
    /// `(alpha, report)` for each sweep value.
    pub sweep: Vec<(f64, EvalReport)>,
}

/// Runs every stage on an already loaded clean graph without touching the
/// filesystem.
pub fn run_pipeline<T: Scalar>(clean: &AttributedGraph<T>, config: &ExperimentConfig) -> Result<PipelineOutput<T>> {
    config.validate()?;
    let config = config.resolved();
    let seeds = config.seeds();
    let (graph, truth, _) = inject_stage(clean, &config.injection).map_err(|e| e.in_stage("inject"))?;
    let trained = train(&graph, &config.train).map_err(|e| e.in_stage("train"))?;
    let mut schedule = propose_regions(&graph);
    let scores = score_stage(
        &graph,
        &trained.params,
        &mut schedule,
        &config.train,
        seeds.inference,
        config.similarity_source,
        &config.fusion,
    )?;
    let report = evaluate(&scores, &truth, &config.k_list).map_err(|e| e.in_stage("evaluate"))?;
    let sweep = config
        .alpha_sweep
        .iter()
        .map(|&a| {
            let t = scores.refuse(&FusionConfig::weighted(a))?;
            Ok((a, evaluate(&t, &truth, &config.k_list)?))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("evaluate"))?;
    Ok(PipelineOutput {
        config,
        graph,
        truth,
        trained,
        schedule,
        scores,
        report,
        sweep,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seeds: StageSeeds,
    pub config: ExperimentConfig,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

impl ArtifactWriter {
    fn write(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| Error::io(&path, e))?;
        std::fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
        self.files.push(ManifestEntry {
            path: name.to_owned(),
            sha256: hex::encode(Sha256::digest(&buf)),
        });
        Ok(())
    }

    fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        self.write(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value).map_err(std::io::Error::other)?;
            buf.write_all(b"\n")
        })
    }
}

fn load_input<T: Scalar>(config: &ExperimentConfig) -> Result<AttributedGraph<T>> {
    match &config.id_map {
        None => io::load_graph_files(&config.edges, &config.attributes),
        Some(map_path) => {
            let map = io::IdMap::read(io::open(map_path)?)?;
            io::load_graph_with_id_map(io::open(&config.edges)?, io::open(&config.attributes)?, map)
        }
    }
}

/// File name for a sweep report, e.g. `report_alpha_0.80.json`.
pub fn sweep_report_name(alpha: f64) -> String {
    format!("report_alpha_{alpha:.2}.json")
}

/// Runs the whole pipeline from the configured input files and writes all
/// artifacts into `output_dir`. On failure the manifest is still written,
/// marked incomplete with the failing stage.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut out = ArtifactWriter { dir, files: Vec::new() };
    let resolved = config.resolved();

    let result = write_pipeline(&resolved, &mut out);
    let (failed_stage, error) = match &result {
        Ok(_) => (None, None),
        Err(Error::Stage { stage, source }) => (Some(stage.to_string()), Some(source.to_string())),
        Err(e) => (Some("write".to_owned()), Some(e.to_string())),
    };
    let manifest = Manifest {
        complete: result.is_ok(),
        failed_stage,
        error,
        seeds: config.seeds(),
        config: resolved,
        files: out.files.clone(),
    };
    let path = out.dir.join(MANIFEST_FILE);
    let mut w = io::create(&path)?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Error::json(&path, e))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&path, e))?;
    result
}

fn write_pipeline(config: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<EvalReport> {
    let seeds = config.seeds();
    let clean: AttributedGraph<f64> = load_input(config).map_err(|e| e.in_stage("load"))?;

    let (graph, truth, log) = inject_stage(&clean, &config.injection).map_err(|e| e.in_stage("inject"))?;
    out.write("injected_edges.txt", |w| io::write_edge_list(&graph, w))?;
    out.write("injected_attributes.csv", |w| {
        io::write_attributes(graph.attributes(), w)
    })?;
    out.write("ground_truth.csv", |w| truth.write_csv(w))?;
    out.json(
        "injection.json",
        &InjectionRecord {
            config: config.injection.clone(),
            log,
        },
    )?;

    let trained = train(&graph, &config.train).map_err(|e| e.in_stage("train"))?;
    out.json("model.json", &Checkpoint::new(&trained.params, &config.train))?;
    out.write("loss.csv", |w| trained.write_loss_csv(w))?;

    let mut schedule = propose_regions(&graph);
    let scores = score_stage(
        &graph,
        &trained.params,
        &mut schedule,
        &config.train,
        seeds.inference,
        config.similarity_source,
        &config.fusion,
    )?;
    out.json("regions.json", &schedule)?;
    out.write("scores.csv", |w| scores.write_csv(Some(&truth), w))?;

    let report = evaluate(&scores, &truth, &config.k_list).map_err(|e| e.in_stage("evaluate"))?;
    out.json("report.json", &report)?;
    out.write("roc.csv", |w| report.write_roc_csv(w))?;

    for &alpha in &config.alpha_sweep {
        let table = scores
            .refuse(&FusionConfig::weighted(alpha))
            .map_err(|e| e.in_stage("fuse"))?;
        let r = evaluate(&table, &truth, &config.k_list).map_err(|e| e.in_stage("evaluate"))?;
        out.json(&sweep_report_name(alpha), &r)?;
    }
    Ok(report)
}
