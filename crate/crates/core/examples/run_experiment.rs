//! End-to-end experiment from a JSON config, writing every artifact into a
//! directory (default: `$HYPEREXPLAIN_OUT` or `hyperexplain-out`).
//!
//! `cargo run --release --example run_experiment [config.json]`

use hyperexplain::explain::{ExplainConfig, Sampler};
use hyperexplain::harness::{run_experiment, ConceptConfig, DatasetSource, ExperimentConfig, InstanceSelection};

fn main() -> hyperexplain::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            dataset: DatasetSource::Preset { name: "H-TreeGrid".into(), seed: 0 },
            explain: ExplainConfig { epochs: 200, ..ExplainConfig::default() },
            budget: 20,
            instances: InstanceSelection::Sample { count: 20, seed: 0 },
            curve: vec![0.1, 0.05, 0.01],
            ablation: vec![Sampler::Gumbel, Sampler::RelaxThresh],
            concepts: Some(ConceptConfig::default()),
            output_dir: std::env::var_os("HYPEREXPLAIN_OUT").map_or_else(|| "hyperexplain-out".into(), Into::into),
            ..ExperimentConfig::default()
        },
    };
    let manifest = run_experiment(&cfg)?;
    println!("{} stages finished; files:", manifest.completed.len());
    for f in &manifest.files {
        println!("  {}/{f}", cfg.output_dir.display());
    }
    Ok(())
}
