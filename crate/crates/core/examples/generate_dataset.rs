//! Generates the four synthetic benchmarks and prints their statistics.
//!
//! `cargo run --release --example generate_dataset [out_dir]`

use hyperexplain::hypergraph::Split;
use hyperexplain::synthetic::{assemble_dataset, DatasetSpec};

fn main() -> hyperexplain::Result<()> {
    let out = std::env::args().nth(1);
    println!("{:<12} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}", "dataset", "nodes", "edges", "links", "class", "train", "val");
    for name in ["H-RandHouse", "H-CommHouse", "H-TreeCycle", "H-TreeGrid"] {
        let g = assemble_dataset(&DatasetSpec::preset(name)?)?;
        println!(
            "{:<12} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            name,
            g.num_nodes(),
            g.num_hyperedges(),
            g.num_links(),
            g.num_classes(),
            g.nodes_in(Split::Train).len(),
            g.nodes_in(Split::Val).len()
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            g.save(format!("{dir}/{name}.json"))?;
        }
    }
    Ok(())
}
