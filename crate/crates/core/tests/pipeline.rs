use std::collections::BTreeSet;
use std::path::Path;

use sha2::{Digest, Sha256};

use corecontrast::contrast::train;
use corecontrast::experiment::{inject_stage, run_pipeline, score_stage, Manifest, MANIFEST_FILE};
use corecontrast::metrics::evaluate_scores;
use corecontrast::regions::propose_regions;
use corecontrast::scoring::normalize;
use corecontrast::synthetic::{community_graph, CommunityGraphConfig};
use corecontrast::{
    run_experiment, Error, ExperimentConfig, FusionConfig, Graph, InjectionConfig, StageSeeds, TrainConfig,
};

fn small_graph(seed: u64) -> Graph {
    community_graph(&CommunityGraphConfig {
        nodes: 160,
        communities: 4,
        attribute_dim: 40,
        prototype_size: 8,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn small_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        injection: InjectionConfig {
            clique_size: 8,
            clique_count: 2,
            attr_anomaly_count: 8,
            candidate_set_size: 20,
            ..Default::default()
        },
        train: TrainConfig {
            hidden_dim: 16,
            epochs: 5,
            batch_size: 64,
            rounds_attr: 8,
            ..Default::default()
        },
        k_list: vec![5, 10],
        seed,
        ..Default::default()
    }
}

fn write_inputs(dir: &Path, g: &Graph, cfg: &mut ExperimentConfig) {
    cfg.edges = dir.join("edges.txt");
    cfg.attributes = dir.join("attributes.csv");
    corecontrast::io::save_graph(g, &cfg.edges, &cfg.attributes).unwrap();
}

#[test]
fn staged_run_equals_monolithic_run() {
    let clean = small_graph(1);
    let cfg = small_config(11);
    let whole = run_pipeline(&clean, &cfg).unwrap();

    let seeds = StageSeeds::derive(11);
    let injection = InjectionConfig {
        seed: seeds.injection,
        ..cfg.injection.clone()
    };
    let (graph, truth, _) = inject_stage(&clean, &injection).unwrap();
    let train_cfg = TrainConfig {
        seed: seeds.training,
        ..cfg.train.clone()
    };
    let trained = train(&graph, &train_cfg).unwrap();
    let mut schedule = propose_regions(&graph);
    let scores = score_stage(
        &graph,
        &trained.params,
        &mut schedule,
        &train_cfg,
        seeds.inference,
        cfg.similarity_source,
        &cfg.fusion,
    )
    .unwrap();

    assert_eq!(graph, whole.graph);
    assert_eq!(truth, whole.truth);
    assert_eq!(trained.params, whole.trained.params);
    assert_eq!(schedule, whole.schedule);
    assert_eq!(scores, whole.scores);
}

#[test]
fn alpha_zero_is_topology_only() {
    let clean = small_graph(2);
    let mut cfg = small_config(2);
    cfg.fusion = FusionConfig::weighted(0.0);
    let out = run_pipeline(&clean, &cfg).unwrap();
    let topo = normalize(&out.scores.topo_raw);
    assert_eq!(out.scores.final_score, topo);
    let expected = evaluate_scores(&topo, &out.truth, &cfg.k_list).unwrap();
    assert_eq!(out.report, expected);
}

#[test]
fn sweep_reports_match_refused_scores() {
    let clean = small_graph(3);
    let mut cfg = small_config(3);
    cfg.alpha_sweep = vec![0.0, 0.5, 1.0];
    let out = run_pipeline(&clean, &cfg).unwrap();
    assert_eq!(out.sweep.len(), 3);
    let attr_only = evaluate_scores(&normalize(&out.scores.attr_raw), &out.truth, &cfg.k_list).unwrap();
    assert_eq!(out.sweep[2].1, attr_only);
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(4);
    write_inputs(dir.path(), &small_graph(4), &mut cfg);
    cfg.output_dir = dir.path().join("out");
    cfg.alpha_sweep = vec![0.0, 1.0];
    run_experiment(&cfg).unwrap();

    let text = std::fs::read_to_string(cfg.output_dir.join(MANIFEST_FILE)).unwrap();
    let manifest: Manifest = serde_json::from_str(&text).unwrap();
    assert!(manifest.complete);
    assert_eq!(manifest.seeds, StageSeeds::derive(4));
    assert_eq!(manifest.config.train.seed, manifest.seeds.training);

    let on_disk: BTreeSet<String> = std::fs::read_dir(&cfg.output_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != MANIFEST_FILE)
        .collect();
    let listed: BTreeSet<String> = manifest.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(on_disk, listed);
    for name in [
        "scores.csv",
        "report.json",
        "model.json",
        "regions.json",
        "report_alpha_1.00.json",
    ] {
        assert!(listed.contains(name), "{name} missing");
    }
    for entry in &manifest.files {
        let bytes = std::fs::read(cfg.output_dir.join(&entry.path)).unwrap();
        assert_eq!(entry.sha256, hex::encode(Sha256::digest(&bytes)), "{}", entry.path);
    }
}

#[test]
fn failed_run_leaves_incomplete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(5);
    cfg.edges = dir.path().join("missing.txt");
    cfg.attributes = dir.path().join("missing.csv");
    cfg.output_dir = dir.path().join("out");
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("load"), "{err}");

    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(cfg.output_dir.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert!(!manifest.complete);
    assert_eq!(manifest.failed_stage.as_deref(), Some("load"));
    assert!(manifest.files.is_empty());
}

#[test]
fn divergence_is_reported_from_training_stage() {
    let g = small_graph(6);
    let huge = g.attributes().mapv(|x| x * 1e300 + 1e300);
    let g = g.with_attributes(huge).unwrap();
    let err = run_pipeline(&g, &small_config(6)).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    match err {
        Error::Stage { stage, .. } => assert_eq!(stage, "train"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn invalid_configs_are_config_errors() {
    let clean = small_graph(7);
    let mut cfg = small_config(7);
    cfg.fusion = FusionConfig::weighted(1.5);
    assert_eq!(run_pipeline(&clean, &cfg).unwrap_err().exit_code(), 2);
    let mut cfg = small_config(7);
    cfg.alpha_sweep = vec![-0.1];
    assert_eq!(run_pipeline(&clean, &cfg).unwrap_err().exit_code(), 2);
    let mut cfg = small_config(7);
    cfg.train.learning_rate = 0.0;
    assert_eq!(run_pipeline(&clean, &cfg).unwrap_err().exit_code(), 2);
}

#[test]
fn raw_similarity_and_alternative_fusions_run() {
    let clean = small_graph(8);
    let mut cfg = small_config(8);
    cfg.similarity_source = corecontrast::SimilaritySource::Raw;
    for strategy in [corecontrast::FusionStrategy::Max, corecontrast::FusionStrategy::Sum] {
        cfg.fusion = FusionConfig { alpha: None, strategy };
        let out = run_pipeline(&clean, &cfg).unwrap();
        assert!((0.0..=1.0).contains(&out.report.auc));
        assert_eq!(out.scores.final_score.len(), clean.node_count());
    }
}
