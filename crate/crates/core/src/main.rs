use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corecontrast::contrast::{self, Checkpoint, TrainConfig};
use corecontrast::experiment::{self, ExperimentConfig, SimilaritySource};
use corecontrast::injector::{GroundTruth, InjectionConfig};
use corecontrast::io::{self as gio, IdMap};
use corecontrast::metrics::{self, EvalReport, DEFAULT_K_LIST};
use corecontrast::regions::propose_regions;
use corecontrast::scoring::{FusionConfig, FusionStrategy, ScoreTable};
use corecontrast::synthetic::{community_graph, CommunityGraphConfig};
use corecontrast::{Error, Graph, Result};

#[derive(Parser)]
#[command(version, about = "Substructure-aware anomaly detection on attributed networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Edge list, one `u v` pair per line
    #[arg(long)]
    edges: PathBuf,
    /// Attribute CSV, row i = node i
    #[arg(long)]
    attributes: PathBuf,
    /// Id map CSV when the edge list uses external ids
    #[arg(long)]
    id_map: Option<PathBuf>,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph> {
        match &self.id_map {
            None => gio::load_graph_files(&self.edges, &self.attributes),
            Some(p) => gio::load_graph_with_id_map(
                gio_open(&self.edges)?,
                gio_open(&self.attributes)?,
                IdMap::read(gio_open(p)?)?,
            ),
        }
    }
}

fn gio_open(p: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(p)
        .map(std::io::BufReader::new)
        .map_err(|e| Error::Io {
            path: p.to_owned(),
            source: e,
        })
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted-community attributed graph
    Generate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 500)]
        nodes: usize,
        #[arg(long, default_value_t = 5)]
        communities: usize,
        #[arg(long, default_value_t = 4.0)]
        average_degree: f64,
        #[arg(long, default_value_t = 100)]
        attribute_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Plant topology and attribute anomalies
    Inject {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 15)]
        clique_size: usize,
        #[arg(long, default_value_t = 5)]
        clique_count: usize,
        #[arg(long, default_value_t = 0.0)]
        edge_drop_ratio: f64,
        #[arg(long, default_value_t = 75)]
        attr_anomalies: usize,
        #[arg(long, default_value_t = 50)]
        candidates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the contrastive encoder and write a checkpoint
    Train {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: PathBuf,
        /// Loss curve CSV
        #[arg(long)]
        loss: Option<PathBuf>,
        /// JSON training config; flags below override it
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        hidden_dim: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dump the k-core region schedule as JSON
    Regions {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every node with a trained checkpoint
    Score {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ground truth CSV; fills the label and kind columns
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Also write the annotated region schedule
        #[arg(long)]
        regions_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SimilaritySource::Embeddings)]
        similarity_source: SimilaritySource,
        #[arg(long, value_enum, default_value_t = FusionStrategy::Weight)]
        fusion: FusionStrategy,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        /// Inference rounds; defaults to the checkpoint's setting
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a score CSV against its label columns
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        roc: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
    /// Full pipeline from a JSON experiment config
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        similarity_source: Option<SimilaritySource>,
        #[arg(long, value_enum)]
        fusion: Option<FusionStrategy>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        edge_drop_ratio: Option<f64>,
        /// Comma-separated alpha values; one extra report per value
        #[arg(long, value_delimiter = ',')]
        alpha_sweep: Option<Vec<f64>>,
    },
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<()> {
    let io_err = |e| Error::Io {
        path: path.to_owned(),
        source: e,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err)
}

fn write_with(path: &Path, fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let io_err = |e| Error::Io {
        path: path.to_owned(),
        source: e,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut buf = Vec::new();
    fill(&mut buf).map_err(io_err)?;
    std::fs::write(path, buf).map_err(io_err)
}

fn print_report(report: &EvalReport) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "AUC    {:.4}", report.auc);
    let _ = writeln!(out, "AUPRC  {:.4}", report.auprc);
    for (k, p) in &report.precision_at_k {
        let _ = writeln!(out, "P@{k:<5}{p:.4}");
    }
    for (name, set) in [("topology", &report.topology), ("attribute", &report.attribute)] {
        if let Some(s) = set {
            let _ = writeln!(
                out,
                "{name:<10} AUC {:.4}  AUPRC {:.4}  ({} anomalies)",
                s.auc, s.auprc, s.positives
            );
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            out_dir,
            nodes,
            communities,
            average_degree,
            attribute_dim,
            seed,
        } => {
            let cfg = CommunityGraphConfig {
                nodes,
                communities,
                average_degree,
                attribute_dim,
                seed,
                ..Default::default()
            };
            let g: Graph = community_graph(&cfg)?;
            gio::save_graph(&g, &out_dir.join("edges.txt"), &out_dir.join("attributes.csv"))?;
            println!(
                "{} nodes, {} edges -> {}",
                g.node_count(),
                g.edge_count(),
                out_dir.display()
            );
        }
        Command::Inject {
            graph,
            out_dir,
            clique_size,
            clique_count,
            edge_drop_ratio,
            attr_anomalies,
            candidates,
            seed,
        } => {
            let g = graph.load()?;
            let cfg = InjectionConfig {
                clique_size,
                clique_count,
                edge_drop_ratio,
                attr_anomaly_count: attr_anomalies,
                candidate_set_size: candidates,
                seed,
            };
            let (out, truth, log) = experiment::inject_stage(&g, &cfg)?;
            gio::save_graph(&out, &out_dir.join("edges.txt"), &out_dir.join("attributes.csv"))?;
            write_with(&out_dir.join("ground_truth.csv"), |w| truth.write_csv(w))?;
            write_json(
                &out_dir.join("injection.json"),
                &experiment::InjectionRecord { config: cfg, log },
            )?;
            println!("{} anomalies -> {}", truth.anomaly_count(), out_dir.display());
        }
        Command::Train {
            graph,
            out,
            loss,
            config,
            epochs,
            learning_rate,
            hidden_dim,
            batch_size,
            seed,
        } => {
            let g = graph.load()?;
            let mut cfg: TrainConfig = match config {
                Some(p) => serde_json::from_reader(gio_open(&p)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                None => TrainConfig::default(),
            };
            if let Some(v) = epochs {
                cfg.epochs = v;
            }
            if let Some(v) = learning_rate {
                cfg.learning_rate = v;
            }
            if let Some(v) = hidden_dim {
                cfg.hidden_dim = v;
            }
            if let Some(v) = batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            let trained = contrast::train(&g, &cfg)?;
            write_json(&out, &Checkpoint::new(&trained.params, &cfg))?;
            if let Some(p) = loss {
                write_with(&p, |w| trained.write_loss_csv(w))?;
            }
            if let Some(last) = trained.loss_curve.last() {
                println!("final loss {last:.6}");
            }
        }
        Command::Regions { graph, out } => {
            let g = graph.load()?;
            let schedule = propose_regions(&g);
            write_json(&out, &schedule)?;
            println!("{} rounds starting at k = {}", schedule.round_count(), schedule.k_start);
        }
        Command::Score {
            graph,
            model,
            out,
            truth,
            regions_out,
            similarity_source,
            fusion,
            alpha,
            rounds,
            seed,
        } => {
            let g = graph.load()?;
            let ck = Checkpoint::load(&model)?;
            let params = ck.params::<f64>()?;
            let mut train_cfg = ck.config.clone();
            if let Some(r) = rounds {
                train_cfg.rounds_attr = r;
            }
            let truth = truth.map(|p| GroundTruth::read_csv(gio_open(&p)?)).transpose()?;
            let fusion = FusionConfig {
                alpha: Some(alpha),
                strategy: fusion,
            };
            let mut schedule = propose_regions(&g);
            let table =
                experiment::score_stage(&g, &params, &mut schedule, &train_cfg, seed, similarity_source, &fusion)?;
            write_with(&out, |w| table.write_csv(truth.as_ref(), w))?;
            if let Some(p) = regions_out {
                write_json(&p, &schedule)?;
            }
        }
        Command::Eval { scores, out, roc, k } => {
            let (table, truth) = ScoreTable::<f64>::read_csv(gio_open(&scores)?)?;
            let ks = k.unwrap_or_else(|| DEFAULT_K_LIST.to_vec());
            let report = metrics::evaluate(&table, &truth, &ks)?;
            write_json(&out, &report)?;
            if let Some(p) = roc {
                write_with(&p, |w| report.write_roc_csv(w))?;
            }
            print_report(&report);
        }
        Command::Run {
            config,
            output_dir,
            seed,
            similarity_source,
            fusion,
            alpha,
            edge_drop_ratio,
            alpha_sweep,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(v) = output_dir {
                cfg.output_dir = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = similarity_source {
                cfg.similarity_source = v;
            }
            if let Some(v) = fusion {
                cfg.fusion.strategy = v;
            }
            if let Some(v) = alpha {
                cfg.fusion.alpha = Some(v);
            }
            if let Some(v) = edge_drop_ratio {
                cfg.injection.edge_drop_ratio = v;
            }
            if let Some(v) = alpha_sweep {
                cfg.alpha_sweep = v;
            }
            let report = experiment::run_experiment(&cfg)?;
            print_report(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
