use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperexplain::baselines::{explain_all, Method};
use hyperexplain::dot::export_dot;
use hyperexplain::explain::Sampler;
use hyperexplain::harness::{self, DatasetSource, ExperimentConfig, ExplainedInstance, FidelityRow, InstanceSelection};
use hyperexplain::hypergraph::Split;
use hyperexplain::metrics::evaluate_explanations;
use hyperexplain::model::{split_accuracy, Aggregation, HyperGnn};
use hyperexplain::synthetic::{assemble_with_stats, DatasetSpec};
use hyperexplain::Hypergraph;

const OUT_ENV: &str = "HYPEREXPLAIN_OUT";

#[derive(Parser)]
#[command(name = "hyperexplain", version, about = "Explain hypergraph neural network predictions")]
struct Cli {
    /// Experiment config JSON; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Default directory for outputs whose path is not given.
    #[arg(long, global = true, env = OUT_ENV, default_value = "hyperexplain-out")]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark hypergraph.
    GenerateDataset {
        /// DatasetSpec JSON.
        #[arg(long, conflicts_with = "preset")]
        spec: Option<PathBuf>,
        /// Preset name: H-RandHouse, H-CommHouse, H-TreeCycle or H-TreeGrid.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model (best of the given seeds) and write a checkpoint directory.
    Train {
        #[command(flatten)]
        data: DataArg,
        /// Comma-separated initialization seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, value_parser = parse_aggregation)]
        aggregation: Option<Aggregation>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Mask out every link (features-only control).
        #[arg(long)]
        structure_blind: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explain node predictions with one method.
    Explain {
        #[command(flatten)]
        io: ModelData,
        /// Node to explain; repeat for several. Defaults to the configured instance selection.
        #[arg(long)]
        node: Vec<usize>,
        #[command(flatten)]
        ex: ExplainArgs,
        #[arg(long, default_value = "shypx", value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract concepts and explain each concept's representative node.
    ExplainGlobal {
        #[command(flatten)]
        io: ModelData,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        concept_seed: Option<u64>,
        /// Cluster raw embeddings instead of unit-normalized ones.
        #[arg(long)]
        no_normalize: bool,
        #[command(flatten)]
        ex: ExplainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fidelity table for saved explanations, or for freshly computed ones.
    Evaluate {
        #[command(flatten)]
        io: ModelData,
        /// Explanation JSON written by `explain`; without it the methods are run.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Methods to run; repeat for several.
        #[arg(long, value_parser = parse_method)]
        method: Vec<Method>,
        #[command(flatten)]
        ex: ExplainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fidelity/size tradeoff over a grid of lambda_size / lambda_pred.
    Curve {
        #[command(flatten)]
        io: ModelData,
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        #[command(flatten)]
        ex: ExplainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean best loss of each sampler at one size weight.
    AblateSampler {
        #[command(flatten)]
        io: ModelData,
        #[arg(long, value_delimiter = ',', value_parser = parse_sampler)]
        samplers: Vec<Sampler>,
        #[command(flatten)]
        ex: ExplainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an explanation as Graphviz DOT.
    ExportDot {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        record: PathBuf,
        /// Which record to render when the file holds several.
        #[arg(long)]
        node: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full configured experiment.
    Run {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArg {
    /// Hypergraph JSON; defaults to the configured dataset.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct ModelData {
    #[command(flatten)]
    data: DataArg,
    /// Checkpoint directory; defaults to the configured checkpoint.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    lambda_pred: Option<f64>,
    #[arg(long)]
    lambda_size: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_parser = parse_sampler)]
    sampler: Option<Sampler>,
    #[arg(long)]
    seed: Option<u64>,
    /// Baseline link budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Explain a random sample of this many val nodes instead of all of them.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
}

enum Failure {
    Usage(String),
    Stage(hyperexplain::Error),
}

impl From<hyperexplain::Error> for Failure {
    fn from(e: hyperexplain::Error) -> Self {
        Failure::Stage(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: hyperexplain::Error| e.to_string())
}

fn parse_sampler(s: &str) -> Result<Sampler, String> {
    s.parse().map_err(|e: hyperexplain::Error| e.to_string())
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    match s {
        "sum" => Ok(Aggregation::Sum),
        "attention" => Ok(Aggregation::Attention),
        _ => Err(format!("unknown aggregation `{s}`")),
    }
}

impl ExplainArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let e = &mut cfg.explain;
        if let Some(v) = self.lambda_pred {
            e.lambda_pred = v;
        }
        if let Some(v) = self.lambda_size {
            e.lambda_size = v;
            cfg.ablation_lambda_size = v;
        }
        if let Some(v) = self.epochs {
            e.epochs = v;
        }
        if let Some(v) = self.lr {
            e.learning_rate = v;
        }
        if let Some(v) = self.sampler {
            e.sampler = v;
        }
        if let Some(v) = self.seed {
            e.seed = v;
        }
        if let Some(v) = self.budget {
            cfg.budget = v;
        }
        if let Some(count) = self.sample {
            cfg.instances = InstanceSelection::Sample { count, seed: self.sample_seed };
        }
    }
}

fn load_data(arg: &DataArg, cfg: &ExperimentConfig) -> Outcome<Hypergraph> {
    match &arg.data {
        Some(p) => Ok(Hypergraph::load(p)?),
        None => Ok(cfg.dataset.materialize()?.0),
    }
}

fn load_model(io: &ModelData, cfg: &ExperimentConfig) -> Outcome<(HyperGnn, Hypergraph)> {
    let path = io
        .model
        .as_ref()
        .or(cfg.checkpoint.as_ref())
        .ok_or_else(|| Failure::Usage("--model is required (or set `checkpoint` in the config)".into()))?;
    let (model, _) = HyperGnn::load(path)?;
    Ok((model, load_data(&io.data, cfg)?))
}

fn instances(nodes: &[usize], g: &Hypergraph, cfg: &ExperimentConfig) -> Outcome<Vec<usize>> {
    if nodes.is_empty() {
        Ok(harness::select_instances(g, &cfg.instances)?)
    } else {
        Ok(nodes.to_vec())
    }
}

fn out_path(out: &Option<PathBuf>, root: &Path, default: &str) -> Outcome<PathBuf> {
    let p = out.clone().unwrap_or_else(|| root.join(default));
    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(hyperexplain::Error::from)?;
    }
    Ok(p)
}

fn run(cli: Cli) -> Outcome<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let root = cli.out_root.as_path();
    match cli.command {
        Command::GenerateDataset { spec, preset, seed, out } => {
            let mut spec = match (spec, preset) {
                (Some(p), _) => harness::read_json::<DatasetSpec>(p)?,
                (None, Some(name)) => DatasetSpec::preset(&name)?,
                (None, None) => match &cfg.dataset {
                    DatasetSource::Spec(s) => s.clone(),
                    DatasetSource::Preset { name, seed } => DatasetSpec::preset(name)?.with_seed(*seed),
                    DatasetSource::Path(_) => return Err(Failure::Usage("give --spec or --preset".into())),
                },
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let (g, stats) = assemble_with_stats(&spec)?;
            let path = out_path(&out, root, "dataset.json")?;
            g.save(&path)?;
            println!(
                "{} nodes ({} base, {} motifs), {} hyperedges ({} perturbations), {} classes -> {}",
                g.num_nodes(),
                stats.base_nodes,
                stats.motifs,
                g.num_hyperedges(),
                stats.perturbations,
                stats.num_classes,
                path.display()
            );
        }
        Command::Train { data, seeds, aggregation, epochs, lr, structure_blind, out } => {
            if !seeds.is_empty() {
                cfg.train_seeds = seeds;
            }
            if let Some(a) = aggregation {
                cfg.arch.aggregation = a;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(l) = lr {
                cfg.train.learning_rate = l;
            }
            cfg.train.structure_blind |= structure_blind;
            let g = load_data(&data, &cfg)?;
            let (model, meta) = harness::train_best(&g, &cfg.arch, &cfg.train, &cfg.train_seeds)?;
            let path = out_path(&out, root, "model")?;
            model.save(&path, &meta)?;
            let val_acc = split_accuracy(&model, &g, Split::Val, cfg.train.structure_blind)?;
            println!("seed {} train_acc {:.4} val_acc {:.4} -> {}", meta.seed, meta.train_acc.unwrap_or(0.0), val_acc, path.display());
        }
        Command::Explain { io, node, ex, method, out } => {
            ex.apply(&mut cfg);
            let (model, g) = load_model(&io, &cfg)?;
            let nodes = instances(&node, &g, &cfg)?;
            let records = explain_all(method, &model, &g, &nodes, cfg.budget, &cfg.explain)?;
            let (_, metrics) = evaluate_explanations(&model, &g, &records)?;
            let items: Vec<ExplainedInstance> =
                records.into_iter().zip(metrics).map(|(record, metrics)| ExplainedInstance { record, metrics }).collect();
            let path = out_path(&out, root, "explanation.json")?;
            if let [one] = items.as_slice() {
                harness::write_json(&path, one)?;
            } else {
                harness::write_json(&path, &items)?;
            }
            for it in &items {
                println!(
                    "node {} size {} fid-_kl {:.4} fid+_kl {:.4}",
                    it.record.node,
                    it.record.size(),
                    it.metrics.fid_minus.kl,
                    it.metrics.fid_plus.kl
                );
            }
        }
        Command::ExplainGlobal { io, k, concept_seed, no_normalize, ex, out } => {
            ex.apply(&mut cfg);
            let mut cc = cfg.concepts.clone().unwrap_or_default();
            if let Some(k) = k {
                cc.k = k;
            }
            if let Some(s) = concept_seed {
                cc.seed = s;
            }
            cc.normalize &= !no_normalize;
            let (model, g) = load_model(&io, &cfg)?;
            let global = harness::global_explanation(&model, &g, &cc, &cfg.explain)?;
            let val_acc = split_accuracy(&model, &g, Split::Val, false)?;
            let dir = out.unwrap_or_else(|| root.join("concepts"));
            let index = harness::write_concepts(&dir, &global, &cc, val_acc, &g)?;
            println!("completeness {:.4} (val accuracy {:.4})", index.completeness, val_acc);
            for (class, entries) in &index.classes {
                println!("class {class}: {} concepts", entries.len());
            }
        }
        Command::Evaluate { io, records, method, ex, out } => {
            ex.apply(&mut cfg);
            let (model, g) = load_model(&io, &cfg)?;
            let rows = match records {
                Some(p) => {
                    let recs = harness::read_records(p)?;
                    let (report, _) = evaluate_explanations(&model, &g, &recs)?;
                    let name = recs.first().map_or("unknown".to_string(), |r| r.method.clone());
                    vec![FidelityRow::new(&name, &report)]
                }
                None => {
                    let methods = match (method.is_empty(), model.config().aggregation) {
                        (false, _) => method,
                        (true, Aggregation::Attention) => Method::ALL.to_vec(),
                        (true, Aggregation::Sum) => cfg.methods.clone(),
                    };
                    let nodes = harness::select_instances(&g, &cfg.instances)?;
                    harness::run_methods(&model, &g, &nodes, &methods, cfg.budget, &cfg.explain)?
                        .iter()
                        .map(|r| FidelityRow::new(r.method.name(), &r.report))
                        .collect()
                }
            };
            let path = out_path(&out, root, "fidelity.csv")?;
            harness::write_csv(&path, &rows)?;
            for r in &rows {
                println!("{:<10} fid-_acc {:.4} fid-_kl {:.4} size {:.2}", r.method, r.fid_minus_acc, r.fid_minus_kl, r.size);
            }
        }
        Command::Curve { io, grid, ex, out } => {
            ex.apply(&mut cfg);
            if !grid.is_empty() {
                cfg.curve = grid;
            }
            if cfg.curve.is_empty() {
                cfg.curve = vec![0.2, 0.1, 0.05, 0.02, 0.01, 0.005];
            }
            let (model, g) = load_model(&io, &cfg)?;
            let nodes = harness::select_instances(&g, &cfg.instances)?;
            let rows = harness::tradeoff_curve(&model, &g, &nodes, &cfg.explain, &cfg.curve)?;
            harness::write_csv(out_path(&out, root, "curve.csv")?, &rows)?;
            for r in &rows {
                println!("ratio {:<6} fid-_kl {:.4} size {:.2}", r.ratio, r.fid_minus_kl, r.size);
            }
        }
        Command::AblateSampler { io, samplers, ex, out } => {
            ex.apply(&mut cfg);
            if !samplers.is_empty() {
                cfg.ablation = samplers;
            }
            if cfg.ablation.is_empty() {
                cfg.ablation = vec![Sampler::Gumbel, Sampler::RelaxThresh, Sampler::Sparsemax];
            }
            let (model, g) = load_model(&io, &cfg)?;
            let nodes = harness::select_instances(&g, &cfg.instances)?;
            let rows =
                harness::sampler_ablation(&model, &g, &nodes, &cfg.explain, &cfg.ablation, cfg.ablation_lambda_size)?;
            harness::write_csv(out_path(&out, root, "ablation.csv")?, &rows)?;
            for r in &rows {
                println!("{:<12} best_loss {:.4} size {:.2}", r.sampler, r.best_loss, r.size);
            }
        }
        Command::ExportDot { data, record, node, out } => {
            let g = load_data(&data, &cfg)?;
            let recs = harness::read_records(&record)?;
            let rec = match node {
                Some(v) => recs.iter().find(|r| r.node == v),
                None => recs.first(),
            }
            .ok_or_else(|| Failure::Usage("no matching record in the file".into()))?;
            let text = export_dot(rec, &g);
            let path = out_path(&out, root, "explanation.dot")?;
            std::fs::write(&path, text).map_err(hyperexplain::Error::from)?;
            println!("{}", path.display());
        }
        Command::Run { out } => {
            if let Some(dir) = out {
                cfg.output_dir = dir;
            } else if cli.config.is_none() || cfg.output_dir == ExperimentConfig::default().output_dir {
                cfg.output_dir = root.to_path_buf();
            }
            let manifest = harness::run_experiment(&cfg)?;
            println!("stages: {}", manifest.completed.join(", "));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
