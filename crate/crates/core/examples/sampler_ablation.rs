//! Mean best loss of the Gumbel, relax-and-thresh and sparsemax samplers.
//!
//! `cargo run --release --example sampler_ablation`

use hyperexplain::explain::{ExplainConfig, Sampler};
use hyperexplain::harness::{sampler_ablation, select_instances, InstanceSelection};
use hyperexplain::model::{fit, ModelConfig, TrainConfig};
use hyperexplain::synthetic::{assemble_dataset, DatasetSpec};

fn main() -> hyperexplain::Result<()> {
    let g = assemble_dataset(&DatasetSpec::rand_house())?;
    let (model, _) = fit(&g, ModelConfig::for_hypergraph(&g), &TrainConfig::default())?;
    let nodes = select_instances(&g, &InstanceSelection::Sample { count: 50, seed: 0 })?;
    let samplers = [Sampler::Gumbel, Sampler::RelaxThresh, Sampler::Sparsemax];
    for row in sampler_ablation(&model, &g, &nodes, &ExplainConfig::default(), &samplers, 0.005)? {
        println!("{:<12} best loss {:.4}  Fid-(KL) {:.4}  size {:.2}", row.sampler, row.best_loss, row.fid_minus_kl, row.size);
    }
    Ok(())
}
