mod common;

use std::path::Path;

use hyperexplain::baselines::Method;
use hyperexplain::explain::{ExplainConfig, Sampler};
use hyperexplain::harness::{
    read_csv, read_json, read_records, run_experiment, AblationRow, ConceptConfig, ConceptIndex, CurveRow, DatasetSource,
    ExperimentConfig, FidelityRow, InstanceSelection, Manifest,
};
use hyperexplain::model::{HyperGnn, TrainConfig};
use hyperexplain::synthetic::DatasetSpec;
use hyperexplain::Hypergraph;

fn minimal(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Spec(serde_json::from_str::<DatasetSpec>(common::tiny_spec_json()).unwrap()),
        train: TrainConfig { epochs: 60, ..TrainConfig::default() },
        explain: ExplainConfig { epochs: 40, ..ExplainConfig::default() },
        methods: vec![Method::Shypx],
        instances: InstanceSelection::Sample { count: 5, seed: 2 },
        curve: vec![0.1, 0.01],
        ablation: vec![Sampler::Gumbel, Sampler::RelaxThresh, Sampler::Sparsemax],
        concepts: Some(ConceptConfig { k: 3, ..ConceptConfig::default() }),
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn minimal_run_writes_parsable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let manifest = run_experiment(&minimal(dir)).unwrap();
    assert_eq!(manifest.last_stage(), Some("done"));
    assert_eq!(Manifest::load(dir).unwrap(), manifest);

    let g = Hypergraph::load(dir.join("dataset.json")).unwrap();
    assert_eq!(g.num_nodes(), 15 + 5 * 6);
    let (model, meta) = HyperGnn::load(dir.join("model")).unwrap();
    assert_eq!(model.config().num_classes, g.num_classes());
    assert_eq!(meta.seed, 0);

    let records = read_records(dir.join("records/shypx.json")).unwrap();
    assert_eq!(records.len(), 5);
    assert!(records.windows(2).all(|w| w[0].node < w[1].node));
    let fid: Vec<FidelityRow> = read_csv(dir.join("fidelity.csv")).unwrap();
    assert_eq!(fid.len(), 1);
    assert_eq!(fid[0].method, "shypx");
    assert_eq!(fid[0].instances, 5);
    let curve: Vec<CurveRow> = read_csv(dir.join("curve.csv")).unwrap();
    assert_eq!(curve.iter().map(|r| r.ratio).collect::<Vec<_>>(), vec![0.1, 0.01]);
    let ablation: Vec<AblationRow> = read_csv(dir.join("ablation.csv")).unwrap();
    assert_eq!(ablation.len(), 3);
    let index: ConceptIndex = read_json(dir.join("concepts/index.json")).unwrap();
    for entries in index.classes.values() {
        for e in entries {
            assert!(dir.join("concepts").join(&e.record).exists());
            assert!(std::fs::read_to_string(dir.join("concepts").join(&e.dot)).unwrap().starts_with("graph "));
        }
    }
    for f in &manifest.files {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&minimal(a.path())).unwrap();
    run_experiment(&minimal(b.path())).unwrap();
    for f in [
        "dataset.json",
        "model/manifest.json",
        "model/weights.bin",
        "records/shypx.json",
        "fidelity.csv",
        "curve.csv",
        "ablation.csv",
        "concepts/index.json",
    ] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failing_stage_keeps_earlier_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        concepts: Some(ConceptConfig { k: 10_000, ..ConceptConfig::default() }),
        curve: vec![],
        ablation: vec![],
        ..minimal(tmp.path())
    };
    assert!(run_experiment(&cfg).is_err());
    let manifest = Manifest::load(tmp.path()).unwrap();
    assert_eq!(manifest.last_stage(), Some("explain"));
    assert_eq!(manifest.failed.as_ref().map(|f| f.0.as_str()), Some("concepts"));
    assert!(tmp.path().join("fidelity.csv").exists());
    assert_eq!(manifest.seeds.get("dataset"), Some(&7));
}

#[test]
fn reuses_saved_dataset_and_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let first = minimal(&tmp.path().join("a"));
    run_experiment(&ExperimentConfig { methods: vec![], curve: vec![], ablation: vec![], concepts: None, ..first.clone() })
        .unwrap();
    let cfg = ExperimentConfig {
        dataset: DatasetSource::Path(tmp.path().join("a/dataset.json")),
        checkpoint: Some(tmp.path().join("a/model")),
        curve: vec![],
        ablation: vec![],
        concepts: None,
        output_dir: tmp.path().join("b"),
        ..first
    };
    let manifest = run_experiment(&cfg).unwrap();
    assert!(!manifest.files.iter().any(|f| f == "dataset.json" || f == "model"));
    assert!(tmp.path().join("b/fidelity.csv").exists());
}

#[test]
fn hypergraph_file_round_trip() {
    let g = common::random_hypergraph(5, 9, 5, 3, 2, 3);
    let tmp = tempfile::tempdir().unwrap();
    g.save(tmp.path().join("g.json")).unwrap();
    let back = Hypergraph::load(tmp.path().join("g.json")).unwrap();
    assert_eq!(back.to_json().unwrap(), g.to_json().unwrap());
}
