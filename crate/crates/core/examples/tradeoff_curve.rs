//! Fidelity against explanation size as the size weight shrinks.
//!
//! `cargo run --release --example tradeoff_curve`

use hyperexplain::explain::ExplainConfig;
use hyperexplain::harness::{select_instances, tradeoff_curve, InstanceSelection};
use hyperexplain::model::{fit, ModelConfig, TrainConfig};
use hyperexplain::synthetic::{assemble_dataset, DatasetSpec};

fn main() -> hyperexplain::Result<()> {
    let g = assemble_dataset(&DatasetSpec::rand_house())?;
    let (model, _) = fit(&g, ModelConfig::for_hypergraph(&g), &TrainConfig::default())?;
    let nodes = select_instances(&g, &InstanceSelection::Sample { count: 50, seed: 0 })?;
    let grid = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005];
    println!("{:>8} {:>10} {:>8}", "ratio", "Fid-(KL)", "size");
    for row in tradeoff_curve(&model, &g, &nodes, &ExplainConfig::default(), &grid)? {
        println!("{:>8} {:>10.4} {:>8.2}", row.ratio, row.fid_minus_kl, row.size);
    }
    Ok(())
}
