//! Fidelity table of the explainer against the Random, Gradient and Attention
//! baselines on a sample of H-TreeCycle val nodes.
//!
//! `cargo run --release --example compare_baselines`

use hyperexplain::baselines::Method;
use hyperexplain::explain::ExplainConfig;
use hyperexplain::harness::{run_methods, select_instances, train_best, ArchConfig, FidelityRow, InstanceSelection};
use hyperexplain::model::{Aggregation, TrainConfig};
use hyperexplain::synthetic::{assemble_dataset, DatasetSpec};

fn main() -> hyperexplain::Result<()> {
    let g = assemble_dataset(&DatasetSpec::tree_cycle())?;
    let arch = ArchConfig { aggregation: Aggregation::Attention, ..ArchConfig::default() };
    let (model, meta) = train_best(&g, &arch, &TrainConfig::default(), &[0, 1])?;
    println!("attention model, val accuracy {:.3}", meta.val_acc.unwrap_or(f64::NAN));

    let nodes = select_instances(&g, &InstanceSelection::Sample { count: 30, seed: 0 })?;
    let runs = run_methods(&model, &g, &nodes, &Method::ALL, 10, &ExplainConfig::default())?;
    println!("{:<10} {:>8} {:>8} {:>8} {:>8} {:>6}", "method", "acc", "kl", "tv", "xent", "size");
    for r in &runs {
        let row = FidelityRow::new(r.method.name(), &r.report);
        println!(
            "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>6.2}",
            row.method, row.fid_minus_acc, row.fid_minus_kl, row.fid_minus_tv, row.fid_minus_xent, row.size
        );
    }
    Ok(())
}
