//! Experiment driver: dataset, model, explanation sweeps and the CSV/JSON
//! artifacts they produce.
//!
//! Every stage is also exposed on its own so the command-line tool and the
//! examples can run pieces of the pipeline. [`run_experiment`] chains them and
//! keeps a `MANIFEST.json` in the output directory that names the last
//! completed stage and every seed used.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::{explain_all, Method};
use crate::concepts::{class_explanations, concept_completeness, extract_concepts, unit_rows, ConceptExplanation};
use crate::dot::export_dot;
use crate::error::{Error, Result};
use crate::explain::{explain_nodes, ExplainConfig, ExplanationRecord, Sampler};
use crate::hypergraph::{Hypergraph, Split};
use crate::metrics::{evaluate_explanations, FidelityReport, InstanceMetrics};
use crate::model::{fit, Aggregation, CheckpointMeta, HyperGnn, ModelConfig, TrainConfig, TrainReport};
use crate::rng;
use crate::synthetic::{assemble_dataset, DatasetSpec};

/// Where the hypergraph comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// A named synthetic preset, e.g. `H-RandHouse`, with its seed.
    Preset { name: String, seed: u64 },
    Spec(DatasetSpec),
    /// A hypergraph JSON file.
    Path(PathBuf),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Preset { name: "H-RandHouse".into(), seed: 0 }
    }
}

impl DatasetSource {
    /// Loads or generates the hypergraph. The flag is true when it was generated.
    pub fn materialize(&self) -> Result<(Hypergraph, bool)> {
        match self {
            DatasetSource::Preset { name, seed } => Ok((assemble_dataset(&DatasetSpec::preset(name)?.with_seed(*seed))?, true)),
            DatasetSource::Spec(spec) => Ok((assemble_dataset(spec)?, true)),
            DatasetSource::Path(p) => Ok((Hypergraph::load(p)?, false)),
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            DatasetSource::Preset { seed, .. } => Some(*seed),
            DatasetSource::Spec(spec) => Some(spec.seed),
            DatasetSource::Path(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSelection {
    AllVal,
    Sample { count: usize, seed: u64 },
}

impl Default for InstanceSelection {
    fn default() -> Self {
        InstanceSelection::AllVal
    }
}

/// Model shape; feature and class counts come from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub aggregation: Aggregation,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self { hidden_dim: 16, num_layers: 3, aggregation: Aggregation::Sum }
    }
}

impl ArchConfig {
    pub fn model_config(&self, g: &Hypergraph) -> ModelConfig {
        ModelConfig::for_hypergraph(g)
            .with_hidden(self.hidden_dim)
            .with_layers(self.num_layers)
            .with_aggregation(self.aggregation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConceptConfig {
    pub k: usize,
    pub seed: u64,
    /// Cluster unit-length embeddings instead of the raw ones.
    pub normalize: bool,
}

impl Default for ConceptConfig {
    fn default() -> Self {
        Self { k: 10, seed: 0, normalize: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    /// Initialization seeds; the model with the best val accuracy is kept.
    pub train_seeds: Vec<u64>,
    /// Existing checkpoint directory; skips training when set.
    pub checkpoint: Option<PathBuf>,
    pub explain: ExplainConfig,
    pub methods: Vec<Method>,
    /// Link budget `n` of the top-n baselines.
    pub budget: usize,
    pub instances: InstanceSelection,
    /// `lambda_size / lambda_pred` values for the tradeoff curve; empty skips it.
    pub curve: Vec<f64>,
    /// Samplers for the ablation table; empty skips it.
    pub ablation: Vec<Sampler>,
    pub ablation_lambda_size: f64,
    pub concepts: Option<ConceptConfig>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            train_seeds: vec![0],
            checkpoint: None,
            explain: ExplainConfig::default(),
            methods: vec![Method::Shypx, Method::Random, Method::Gradient],
            budget: 10,
            instances: InstanceSelection::AllVal,
            curve: Vec::new(),
            ablation: Vec::new(),
            ablation_lambda_size: 0.005,
            concepts: None,
            output_dir: PathBuf::from("hyperexplain-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetSource::Path(p) = &self.dataset {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!("dataset {} does not exist", p.display())));
            }
        }
        if let Some(p) = &self.checkpoint {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!("checkpoint {} does not exist", p.display())));
            }
        }
        if self.checkpoint.is_none() && self.methods.contains(&Method::Attention) && self.arch.aggregation != Aggregation::Attention {
            return Err(Error::InvalidConfig("the attention baseline needs an attention-aggregation model".into()));
        }
        if self.train_seeds.is_empty() && self.checkpoint.is_none() {
            return Err(Error::InvalidConfig("train_seeds is empty".into()));
        }
        if let InstanceSelection::Sample { count: 0, .. } = self.instances {
            return Err(Error::InvalidConfig("instance sample of size 0".into()));
        }
        if self.curve.iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::InvalidConfig("curve ratios must be nonnegative".into()));
        }
        if let Some(c) = &self.concepts {
            if c.k == 0 {
                return Err(Error::InvalidConfig("k must be positive".into()));
            }
        }
        self.explain.validate()
    }
}

/// Trains one model per seed and keeps the one with the highest val accuracy
/// (earliest seed on ties).
pub fn train_best(g: &Hypergraph, arch: &ArchConfig, train: &TrainConfig, seeds: &[u64]) -> Result<(HyperGnn, CheckpointMeta)> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("no training seeds".into()));
    }
    let runs: Vec<(u64, TrainConfig, HyperGnn, TrainReport)> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = TrainConfig { seed, ..train.clone() };
            fit(g, arch.model_config(g), &cfg).map(|(m, r)| (seed, cfg, m, r))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(u64, TrainConfig, HyperGnn, TrainReport)> = None;
    for run in runs {
        if best.as_ref().map_or(true, |b| run.3.val_acc > b.3.val_acc) {
            best = Some(run);
        }
    }
    let (seed, cfg, model, report) = best.expect("at least one seed");
    let meta = CheckpointMeta { seed, train: Some(cfg), train_acc: Some(report.train_acc), val_acc: Some(report.val_acc) };
    Ok((model, meta))
}

/// Nodes to explain, in increasing id order.
pub fn select_instances(g: &Hypergraph, sel: &InstanceSelection) -> Result<Vec<usize>> {
    if g.split().is_none() {
        return Err(Error::MissingLabels);
    }
    let val = g.nodes_in(Split::Val);
    if val.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(match *sel {
        InstanceSelection::AllVal => val,
        InstanceSelection::Sample { count, seed } => {
            let mut picked: Vec<usize> = val.choose_multiple(&mut rng::seeded(seed), count).copied().collect();
            picked.sort_unstable();
            picked
        }
    })
}

/// One row of the fidelity table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub method: String,
    pub instances: usize,
    pub fid_minus_acc: f64,
    pub fid_minus_kl: f64,
    pub fid_minus_tv: f64,
    pub fid_minus_xent: f64,
    pub fid_plus_acc: f64,
    pub fid_plus_kl: f64,
    pub fid_plus_tv: f64,
    pub fid_plus_xent: f64,
    pub size: f64,
    pub density: f64,
}

impl FidelityRow {
    pub fn new(method: &str, r: &FidelityReport) -> Self {
        Self {
            method: method.to_string(),
            instances: r.num_instances,
            fid_minus_acc: r.fid_minus.acc,
            fid_minus_kl: r.fid_minus.kl,
            fid_minus_tv: r.fid_minus.tv,
            fid_minus_xent: r.fid_minus.xent,
            fid_plus_acc: r.fid_plus.acc,
            fid_plus_kl: r.fid_plus.kl,
            fid_plus_tv: r.fid_plus.tv,
            fid_plus_xent: r.fid_plus.xent,
            size: r.mean_size,
            density: r.mean_density,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    /// `lambda_size / lambda_pred`.
    pub ratio: f64,
    pub fid_minus_kl: f64,
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub sampler: String,
    pub lambda_size: f64,
    pub best_loss: f64,
    pub fid_minus_kl: f64,
    pub size: f64,
}

pub struct MethodRun {
    pub method: Method,
    pub records: Vec<ExplanationRecord>,
    pub report: FidelityReport,
}

/// Explains `nodes` with each method and evaluates the results.
pub fn run_methods(
    model: &HyperGnn,
    g: &Hypergraph,
    nodes: &[usize],
    methods: &[Method],
    budget: usize,
    cfg: &ExplainConfig,
) -> Result<Vec<MethodRun>> {
    methods
        .iter()
        .map(|&method| {
            let records = explain_all(method, model, g, nodes, budget, cfg)?;
            let (report, _) = evaluate_explanations(model, g, &records)?;
            Ok(MethodRun { method, records, report })
        })
        .collect()
}

/// Mean Fid-^KL and size of the main explainer at `lambda_size = ratio * lambda_pred`.
pub fn tradeoff_curve(
    model: &HyperGnn,
    g: &Hypergraph,
    nodes: &[usize],
    cfg: &ExplainConfig,
    ratios: &[f64],
) -> Result<Vec<CurveRow>> {
    if ratios.is_empty() {
        return Err(Error::InvalidConfig("empty ratio grid".into()));
    }
    ratios
        .iter()
        .map(|&ratio| {
            let c = ExplainConfig { lambda_size: ratio * cfg.lambda_pred, sampler: Sampler::Gumbel, ..cfg.clone() };
            let records = explain_nodes(model, g, nodes, &c)?;
            let (report, _) = evaluate_explanations(model, g, &records)?;
            Ok(CurveRow { ratio, fid_minus_kl: report.fid_minus.kl, size: report.mean_size })
        })
        .collect()
}

/// Mean best loss per sampler at a fixed size weight.
pub fn sampler_ablation(
    model: &HyperGnn,
    g: &Hypergraph,
    nodes: &[usize],
    cfg: &ExplainConfig,
    samplers: &[Sampler],
    lambda_size: f64,
) -> Result<Vec<AblationRow>> {
    if samplers.is_empty() {
        return Err(Error::InvalidConfig("no samplers".into()));
    }
    samplers
        .iter()
        .map(|&sampler| {
            let c = ExplainConfig { lambda_size, sampler, ..cfg.clone() };
            let records = explain_nodes(model, g, nodes, &c)?;
            let (report, _) = evaluate_explanations(model, g, &records)?;
            let best_loss = records.iter().filter_map(|r| r.best_loss).sum::<f64>() / records.len() as f64;
            Ok(AblationRow {
                sampler: sampler_label(sampler).to_string(),
                lambda_size,
                best_loss,
                fid_minus_kl: report.fid_minus.kl,
                size: report.mean_size,
            })
        })
        .collect()
}

fn sampler_label(s: Sampler) -> &'static str {
    match s {
        Sampler::Gumbel => "gumbel",
        Sampler::RelaxThresh => "relax_thresh",
        Sampler::Sparsemax => "sparsemax",
    }
}

/// An explanation together with its fidelity scores, as written by the `explain` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainedInstance {
    #[serde(flatten)]
    pub record: ExplanationRecord,
    pub metrics: InstanceMetrics,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<ExplanationRecord>),
    One(ExplanationRecord),
}

/// Reads a JSON file holding one explanation record or a list of them. Extra
/// fields such as `metrics` are ignored.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ExplanationRecord>> {
    Ok(match read_json(path)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(r) => vec![r],
    })
}

/// Entry of the class-to-concepts index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptEntry {
    pub concept: usize,
    pub num_members: usize,
    pub representative: usize,
    pub size: usize,
    pub record: String,
    pub dot: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptIndex {
    pub k: usize,
    pub seed: u64,
    pub normalize: bool,
    pub completeness: f64,
    pub val_accuracy: f64,
    pub classes: BTreeMap<usize, Vec<ConceptEntry>>,
}

pub struct GlobalExplanation {
    pub completeness: f64,
    pub by_class: BTreeMap<usize, Vec<ConceptExplanation>>,
}

/// Concept extraction, completeness and representative explanations.
pub fn global_explanation(model: &HyperGnn, g: &Hypergraph, cc: &ConceptConfig, cfg: &ExplainConfig) -> Result<GlobalExplanation> {
    let labels = g.labels().ok_or(Error::MissingLabels)?;
    let raw = model.node_embeddings(g)?;
    let z = if cc.normalize { unit_rows(&raw) } else { raw };
    let cm = extract_concepts(&z, cc.k, cc.seed, labels)?;
    let completeness = concept_completeness(&cm, g.labels(), g.split())?;
    let by_class = class_explanations(&cm, model, g, &z, cfg)?;
    Ok(GlobalExplanation { completeness, by_class })
}

/// Writes one record JSON and one DOT file per concept plus `index.json` into `dir`.
pub fn write_concepts(
    dir: &Path,
    global: &GlobalExplanation,
    cc: &ConceptConfig,
    val_accuracy: f64,
    g: &Hypergraph,
) -> Result<ConceptIndex> {
    fs::create_dir_all(dir)?;
    let mut classes = BTreeMap::new();
    for (&class, items) in &global.by_class {
        let mut entries = Vec::new();
        for ce in items {
            let record = format!("concept_{}.json", ce.concept);
            let dot = format!("concept_{}.dot", ce.concept);
            write_json(dir.join(&record), ce)?;
            fs::write(dir.join(&dot), export_dot(&ce.explanation, g))?;
            entries.push(ConceptEntry {
                concept: ce.concept,
                num_members: ce.num_members,
                representative: ce.representative,
                size: ce.explanation.size(),
                record,
                dot,
            });
        }
        classes.insert(class, entries);
    }
    let index = ConceptIndex {
        k: cc.k,
        seed: cc.seed,
        normalize: cc.normalize,
        completeness: global.completeness,
        val_accuracy,
        classes,
    };
    write_json(dir.join("index.json"), &index)?;
    Ok(index)
}

/// Progress record kept in `MANIFEST.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Completed stages in order.
    pub completed: Vec<String>,
    /// Stage that failed, with its diagnostic.
    pub failed: Option<(String, String)>,
    pub seeds: BTreeMap<String, u64>,
    pub files: Vec<String>,
    pub config: Option<ExperimentConfig>,
}

impl Manifest {
    pub const FILE: &'static str = "MANIFEST.json";

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        read_json(dir.as_ref().join(Self::FILE))
    }

    pub fn last_stage(&self) -> Option<&str> {
        self.completed.last().map(String::as_str)
    }
}

struct Run<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Run<'_> {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Manifest) -> Result<T>) -> Result<T> {
        match f(&mut self.manifest) {
            Ok(v) => {
                self.manifest.completed.push(name.to_string());
                self.save()?;
                Ok(v)
            }
            Err(e) => {
                self.manifest.failed = Some((name.to_string(), e.to_string()));
                self.save()?;
                Err(e)
            }
        }
    }

    fn save(&self) -> Result<()> {
        write_json(self.dir.join(Manifest::FILE), &self.manifest)
    }
}

/// Runs every configured stage and writes its artifacts under `cfg.output_dir`:
///
/// * `dataset.json` (generated datasets only) and `model/` (trained models only)
/// * `records/<method>.json` and `fidelity.csv`
/// * `curve.csv` and `ablation.csv` when requested
/// * `concepts/` when requested
///
/// On failure the artifacts written so far stay in place and the manifest names
/// the failing stage.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest { config: Some(cfg.clone()), ..Manifest::default() };
    if let Some(s) = cfg.dataset.seed() {
        manifest.seeds.insert("dataset".into(), s);
    }
    manifest.seeds.insert("explain".into(), cfg.explain.seed);
    if let InstanceSelection::Sample { seed, .. } = cfg.instances {
        manifest.seeds.insert("instances".into(), seed);
    }
    if let Some(c) = &cfg.concepts {
        manifest.seeds.insert("concepts".into(), c.seed);
    }
    let mut run = Run { dir, manifest };
    run.stage("validate", |_| cfg.validate())?;

    let g = run.stage("dataset", |m| {
        let (g, generated) = cfg.dataset.materialize()?;
        if generated {
            g.save(dir.join("dataset.json"))?;
            m.files.push("dataset.json".into());
        }
        Ok(g)
    })?;

    let (model, meta) = run.stage("train", |m| {
        let (model, meta) = match &cfg.checkpoint {
            Some(p) => HyperGnn::load(p)?,
            None => {
                let (model, meta) = train_best(&g, &cfg.arch, &cfg.train, &cfg.train_seeds)?;
                model.save(dir.join("model"), &meta)?;
                m.files.push("model".into());
                (model, meta)
            }
        };
        m.seeds.insert("model".into(), meta.seed);
        Ok((model, meta))
    })?;

    let nodes = run.stage("instances", |_| select_instances(&g, &cfg.instances))?;

    if !cfg.methods.is_empty() {
        run.stage("explain", |m| {
            fs::create_dir_all(dir.join("records"))?;
            let runs = run_methods(&model, &g, &nodes, &cfg.methods, cfg.budget, &cfg.explain)?;
            let mut rows = Vec::new();
            for r in &runs {
                let name = format!("records/{}.json", r.method.name());
                write_json(dir.join(&name), &r.records)?;
                m.files.push(name);
                rows.push(FidelityRow::new(r.method.name(), &r.report));
            }
            write_csv(dir.join("fidelity.csv"), &rows)?;
            m.files.push("fidelity.csv".into());
            Ok(())
        })?;
    }

    if !cfg.curve.is_empty() {
        run.stage("curve", |m| {
            let rows = tradeoff_curve(&model, &g, &nodes, &cfg.explain, &cfg.curve)?;
            write_csv(dir.join("curve.csv"), &rows)?;
            m.files.push("curve.csv".into());
            Ok(())
        })?;
    }

    if !cfg.ablation.is_empty() {
        run.stage("ablation", |m| {
            let rows = sampler_ablation(&model, &g, &nodes, &cfg.explain, &cfg.ablation, cfg.ablation_lambda_size)?;
            write_csv(dir.join("ablation.csv"), &rows)?;
            m.files.push("ablation.csv".into());
            Ok(())
        })?;
    }

    if let Some(cc) = &cfg.concepts {
        run.stage("concepts", |m| {
            let global = global_explanation(&model, &g, cc, &cfg.explain)?;
            write_concepts(&dir.join("concepts"), &global, cc, meta.val_acc.unwrap_or(f64::NAN), &g)?;
            m.files.push("concepts".into());
            Ok(())
        })?;
    }

    run.manifest.completed.push("done".into());
    run.save()?;
    Ok(run.manifest)
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_defaults_and_round_trip() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"budget": 7, "instances": {"sample": {"count": 3, "seed": 1}}}"#).unwrap();
        assert_eq!(cfg.budget, 7);
        assert_eq!(cfg.instances, InstanceSelection::Sample { count: 3, seed: 1 });
        assert_eq!(cfg.methods.len(), 3);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let spec: ExperimentConfig =
            serde_json::from_str(r#"{"dataset": {"preset": {"name": "H-TreeCycle", "seed": 4}}, "instances": "all_val"}"#).unwrap();
        assert_eq!(spec.dataset, DatasetSource::Preset { name: "H-TreeCycle".into(), seed: 4 });
    }

    #[test]
    fn validation_rejects_missing_paths() {
        let cfg = ExperimentConfig { dataset: DatasetSource::Path("/nonexistent/data.json".into()), ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let cfg = ExperimentConfig { train_seeds: vec![], ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { methods: Method::ALL.to_vec(), ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![CurveRow { ratio: 0.2, fid_minus_kl: 0.1234567890123, size: 7.7 }, CurveRow { ratio: 0.005, fid_minus_kl: 1e-17, size: 14.0 }];
        let p = dir.path().join("c.csv");
        write_csv(&p, &rows).unwrap();
        assert_eq!(read_csv::<CurveRow>(&p).unwrap(), rows);
    }
}
