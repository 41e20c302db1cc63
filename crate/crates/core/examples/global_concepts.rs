//! Concept extraction on H-RandHouse: completeness and one explained
//! representative per concept, grouped by class.
//!
//! `cargo run --release --example global_concepts`

use hyperexplain::explain::ExplainConfig;
use hyperexplain::harness::{global_explanation, ConceptConfig};
use hyperexplain::model::{fit, ModelConfig, TrainConfig};
use hyperexplain::synthetic::{assemble_dataset, DatasetSpec};

fn main() -> hyperexplain::Result<()> {
    let g = assemble_dataset(&DatasetSpec::rand_house())?;
    let (model, report) = fit(&g, ModelConfig::for_hypergraph(&g), &TrainConfig::default())?;
    let global = global_explanation(&model, &g, &ConceptConfig::default(), &ExplainConfig::default())?;
    println!("val accuracy {:.3}, concept completeness {:.3}", report.val_acc, global.completeness);
    for (class, concepts) in &global.by_class {
        println!("class {class}:");
        for c in concepts {
            println!(
                "  concept {} ({} members): representative {} explained by {} links",
                c.concept,
                c.num_members,
                c.representative,
                c.explanation.size()
            );
        }
    }
    Ok(())
}
