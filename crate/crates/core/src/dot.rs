//! Graphviz rendering of explanations as bipartite node/hyperedge graphs.

use std::fmt::Write as _;

use crate::explain::ExplanationRecord;
use crate::hypergraph::Hypergraph;

const PALETTE: [&str; 10] = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd",
];

fn class_color(g: &Hypergraph, v: usize) -> &'static str {
    match g.labels() {
        Some(labels) => PALETTE[labels[v] % PALETTE.len()],
        None => "white",
    }
}

/// DOT text for an explanation: circles `n<id>` for nodes, filled by class,
/// with a bold outline on the explained node; boxes `e<id>` for hyperedges; one
/// undirected edge per kept link. Elements are emitted in id order.
pub fn export_dot(record: &ExplanationRecord, g: &Hypergraph) -> String {
    let mut nodes: Vec<usize> = record.pairs.iter().map(|p| p[0]).chain([record.node]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut edges: Vec<usize> = record.pairs.iter().map(|p| p[1]).collect();
    edges.sort_unstable();
    edges.dedup();
    let mut pairs = record.pairs.clone();
    pairs.sort_unstable_by_key(|p| (p[1], p[0]));

    let mut out = String::new();
    let _ = writeln!(out, "graph explanation_{} {{", record.node);
    let _ = writeln!(out, "  layout=neato;");
    for v in nodes {
        let label = g.labels().map_or(String::new(), |l| format!("\\ny={}", l[v]));
        let outline = if v == record.node { ", penwidth=3" } else { "" };
        let _ = writeln!(
            out,
            "  n{v} [shape=circle, style=filled, fillcolor=\"{}\", label=\"{v}{label}\"{outline}];",
            class_color(g, v)
        );
    }
    for e in edges {
        let _ = writeln!(out, "  e{e} [shape=square, label=\"e{e}\", width=0.3];");
    }
    for [v, e] in pairs {
        let _ = writeln!(out, "  n{v} -- e{e};");
    }
    out.push_str("}\n");
    out
}
