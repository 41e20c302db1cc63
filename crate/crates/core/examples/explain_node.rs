//! Explains one house-motif node of H-RandHouse and prints the explanation as DOT.
//!
//! `cargo run --release --example explain_node`

use hyperexplain::dot::export_dot;
use hyperexplain::explain::{explain_instance, ExplainConfig};
use hyperexplain::hypergraph::Split;
use hyperexplain::metrics::instance_metrics;
use hyperexplain::model::{fit, ModelConfig, TrainConfig};
use hyperexplain::synthetic::{assemble_dataset, DatasetSpec};

fn main() -> hyperexplain::Result<()> {
    let g = assemble_dataset(&DatasetSpec::rand_house())?;
    let (model, report) = fit(&g, ModelConfig::for_hypergraph(&g), &TrainConfig::default())?;
    println!("model val accuracy {:.3}", report.val_acc);

    let labels = g.labels().expect("synthetic data is labelled");
    let pred = model.predict(&g)?;
    let v = g
        .nodes_in(Split::Val)
        .into_iter()
        .find(|&v| labels[v] == 1 && pred[v] == 1)
        .expect("a correctly classified house top node");

    let record = explain_instance(&model, &g, v, &ExplainConfig::default())?;
    let m = instance_metrics(&model, &g, &record)?;
    println!(
        "node {v}: kept {} of {} links, best loss {:.4}, Fid-(KL) {:.4}, Fid+(KL) {:.4}",
        record.size(),
        record.comp_size,
        record.best_loss.unwrap_or(f64::NAN),
        m.fid_minus.kl,
        m.fid_plus.kl
    );
    print!("{}", export_dot(&record, &g));
    Ok(())
}
