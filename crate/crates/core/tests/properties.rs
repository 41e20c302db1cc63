mod common;

use std::collections::BTreeSet;

use hyperexplain::baselines::{explain_with, Method};
use hyperexplain::dot::export_dot;
use hyperexplain::explain::{explain_instance, explain_nodes, ExplainConfig, ExplanationRecord};
use hyperexplain::metrics::{instance_metrics, similarity, Similarity};
use hyperexplain::model::{Aggregation, HyperGnn, ModelConfig};
use hyperexplain::{computational_subhypergraph, Hypergraph, Subhypergraph};
use proptest::prelude::*;

fn naive_component(g: &Hypergraph, kept: &[usize], v: usize) -> BTreeSet<usize> {
    let mut nodes = BTreeSet::from([v]);
    let mut edges = BTreeSet::new();
    loop {
        let before = nodes.len() + edges.len();
        for &l in kept {
            let link = g.link(l);
            if nodes.contains(&link.node) || edges.contains(&link.hyperedge) {
                nodes.insert(link.node);
                edges.insert(link.hyperedge);
            }
        }
        if nodes.len() + edges.len() == before {
            break;
        }
    }
    kept.iter().copied().filter(|&l| nodes.contains(&g.link(l).node)).collect()
}

fn subset(links: &[usize], bits: u64) -> Vec<usize> {
    links.iter().enumerate().filter(|(i, _)| bits >> (i % 64) & 1 == 1).map(|(_, &l)| l).collect()
}

fn model_for(g: &Hypergraph, seed: u64, aggregation: Aggregation, layers: usize) -> HyperGnn {
    HyperGnn::init(ModelConfig::for_hypergraph(g).with_layers(layers).with_hidden(6).with_aggregation(aggregation), seed)
        .unwrap()
}

fn distribution(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn autodiff_matches_finite_differences(seed in any::<u64>()) {
        prop_assert!(common::random_program_error(seed) <= 1e-4);
    }

    #[test]
    fn receptive_fields_grow_with_depth(seed in any::<u64>(), v in 0usize..12) {
        let g = common::random_hypergraph(seed, 12, 8, 3, 2, 2);
        let mut prev = computational_subhypergraph(&g, v, 0).unwrap();
        prop_assert!(prev.is_trivial());
        for depth in 1..5 {
            let next = computational_subhypergraph(&g, v, depth).unwrap();
            prop_assert!(prev.is_subset_of(&next));
            prev = next;
        }
    }

    #[test]
    fn complement_conserves_size(seed in any::<u64>(), v in 0usize..12, bits in any::<u64>()) {
        let g = common::random_hypergraph(seed, 12, 8, 3, 2, 2);
        let comp = computational_subhypergraph(&g, v, 2).unwrap();
        let expl = Subhypergraph::new(&g, subset(comp.links(), bits), Some(v)).unwrap();
        let rest = comp.complement(&expl).unwrap();
        prop_assert_eq!(expl.size() + rest.size(), comp.size());
        prop_assert!(rest.links().iter().all(|l| !expl.contains_link(*l)));
        let naive: Vec<usize> = comp.links().iter().copied().filter(|l| !expl.contains_link(*l)).collect();
        prop_assert_eq!(rest.links(), naive.as_slice());
    }

    #[test]
    fn component_matches_naive_and_is_idempotent(seed in any::<u64>(), v in 0usize..10, bits in any::<u64>()) {
        let g = common::random_hypergraph(seed, 10, 6, 3, 2, 2);
        let kept = subset(&(0..g.num_links()).collect::<Vec<_>>(), bits);
        let sub = Subhypergraph::new(&g, kept.clone(), Some(v)).unwrap();
        let cc = sub.connected_component(v);
        let naive: Vec<usize> = naive_component(&g, &kept, v).into_iter().collect();
        prop_assert_eq!(cc.links(), naive.as_slice());
        prop_assert_eq!(cc.connected_component(v).links().to_vec(), cc.links().to_vec());
        prop_assert!(cc.is_subset_of(&sub));
    }

    #[test]
    fn masked_forward_equals_rebuilt_subhypergraph(seed in any::<u64>(), v in 0usize..14, bits in any::<u64>(), attention in any::<bool>()) {
        let g = common::random_hypergraph(seed, 14, 9, 4, 3, 3);
        let agg = if attention { Aggregation::Attention } else { Aggregation::Sum };
        let model = model_for(&g, seed, agg, 2);
        let comp = computational_subhypergraph(&g, v, 2).unwrap();
        for kept in [comp.links().to_vec(), subset(comp.links(), bits)] {
            let masked = common::parent_prediction(&model, &g, v, &kept);
            let view = Subhypergraph::new(&g, kept, Some(v)).unwrap().compact();
            let ones = vec![1.0; view.num_links()];
            let local = model.forward(&view.incidence, &view.features, &ones).unwrap();
            let row = local.row_slice(view.focus.unwrap());
            for (a, b) in masked.iter().zip(row) {
                prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
        }
        let full = model.forward_full(&g).unwrap();
        let rf = common::parent_prediction(&model, &g, v, comp.links());
        for (a, b) in full.row_slice(v).iter().zip(&rf) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn similarity_identities(raw_p in prop::collection::vec(0.01f64..1.0, 2..6), shift in 0.0f64..1.0) {
        let p = distribution(&raw_p);
        let q = distribution(&raw_p.iter().enumerate().map(|(i, x)| x + shift * i as f64).collect::<Vec<_>>());
        let kl = similarity(Similarity::Kl, &p, &q).unwrap();
        let tv = similarity(Similarity::Tv, &p, &q).unwrap();
        let xent = similarity(Similarity::Xent, &p, &q).unwrap();
        let entropy = similarity(Similarity::Xent, &p, &p).unwrap();
        let acc = similarity(Similarity::Acc, &p, &q).unwrap();
        prop_assert!(kl >= -1e-12);
        prop_assert!((0.0..=1.0).contains(&tv));
        prop_assert!((xent - entropy - kl).abs() < 1e-9);
        prop_assert!(acc == 0.0 || acc == 1.0);
        for s in [Similarity::Acc, Similarity::Kl, Similarity::Tv] {
            prop_assert!(similarity(s, &p, &p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_saturates_at_the_extremes(seed in any::<u64>(), v in 0usize..12) {
        let g = common::random_hypergraph(seed, 12, 8, 3, 2, 3);
        let model = model_for(&g, seed, Aggregation::Sum, 2);
        let comp = computational_subhypergraph(&g, v, 2).unwrap();
        let full = ExplanationRecord::new(&g, v, "full", &comp, comp.size());
        let empty = ExplanationRecord::new(&g, v, "empty", &Subhypergraph::trivial(&g, v), comp.size());
        let mf = instance_metrics(&model, &g, &full).unwrap();
        let me = instance_metrics(&model, &g, &empty).unwrap();
        for s in [Similarity::Acc, Similarity::Kl, Similarity::Tv] {
            prop_assert!(mf.fid_minus.get(s).abs() < 1e-12);
            prop_assert!(me.fid_plus.get(s).abs() < 1e-12);
            prop_assert!((me.fid_minus.get(s) - mf.fid_plus.get(s)).abs() < 1e-12);
        }
        prop_assert_eq!(mf.density, if comp.size() == 0 { 0.0 } else { 1.0 });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn explanations_are_connected_subsets_with_exact_loss(seed in any::<u64>(), v in 0usize..14) {
        let g = common::random_hypergraph(seed, 14, 9, 3, 3, 2);
        let model = model_for(&g, seed, Aggregation::Sum, 2);
        let cfg = ExplainConfig { epochs: 60, seed, ..ExplainConfig::default() };
        let rec = explain_instance(&model, &g, v, &cfg).unwrap();
        let comp = computational_subhypergraph(&g, v, 2).unwrap();
        let sub = rec.subhypergraph(&g).unwrap();
        prop_assert!(sub.is_subset_of(&comp));
        prop_assert_eq!(sub.connected_component(v).links().to_vec(), sub.links().to_vec());
        prop_assert_eq!(rec.comp_size, comp.size());
        // best_loss recomputed independently on the masked parent hypergraph
        let p = common::parent_prediction(&model, &g, v, &rec.links);
        let q = common::parent_prediction(&model, &g, v, comp.links());
        let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a.max(1e-12).ln() - b.max(1e-12).ln())).sum();
        let expected = cfg.lambda_pred * kl + cfg.lambda_size * rec.size() as f64;
        prop_assert!((rec.best_loss.unwrap() - expected).abs() < 1e-9);
        if comp.size() <= 12 {
            prop_assert!(rec.best_loss.unwrap() >= common::exhaustive_best_loss(&model, &g, v, &cfg) - 1e-9);
        }
        prop_assert_eq!(&explain_instance(&model, &g, v, &cfg).unwrap(), &rec);
    }

    #[test]
    fn baselines_respect_budget_and_connectivity(seed in any::<u64>(), v in 0usize..14, n in 0usize..6) {
        let g = common::random_hypergraph(seed, 14, 9, 3, 3, 2);
        let model = model_for(&g, seed, Aggregation::Attention, 2);
        let comp = computational_subhypergraph(&g, v, 2).unwrap();
        for m in [Method::Random, Method::Gradient, Method::Attention] {
            let rec = explain_with(m, &model, &g, v, n, &ExplainConfig { seed, ..ExplainConfig::default() }).unwrap();
            let sub = rec.subhypergraph(&g).unwrap();
            prop_assert!(rec.size() <= n);
            prop_assert!(sub.is_subset_of(&comp));
            prop_assert_eq!(sub.connected_component(v).links().to_vec(), sub.links().to_vec());
        }
    }

    #[test]
    fn dot_has_one_element_per_part(seed in any::<u64>(), v in 0usize..12, bits in any::<u64>()) {
        let g = common::random_hypergraph(seed, 12, 8, 3, 2, 2);
        let comp = computational_subhypergraph(&g, v, 2).unwrap();
        let sub = Subhypergraph::new(&g, subset(comp.links(), bits), Some(v)).unwrap();
        let rec = ExplanationRecord::new(&g, v, "any", &sub, comp.size());
        let dot = export_dot(&rec, &g);
        let mut nodes = sub.nodes();
        nodes.push(v);
        nodes.sort_unstable();
        nodes.dedup();
        prop_assert_eq!(dot.matches("shape=circle").count(), nodes.len());
        prop_assert_eq!(dot.matches("shape=square").count(), sub.hyperedges().len());
        prop_assert_eq!(dot.matches(" -- ").count(), sub.size());
    }
}

#[test]
fn parallel_explanations_match_sequential_ones() {
    let g = common::random_hypergraph(3, 20, 12, 3, 3, 2);
    let model = model_for(&g, 1, Aggregation::Sum, 2);
    let cfg = ExplainConfig { epochs: 50, ..ExplainConfig::default() };
    let nodes: Vec<usize> = (0..20).rev().collect();
    let batch = explain_nodes(&model, &g, &nodes, &cfg).unwrap();
    for (rec, &v) in batch.iter().zip(&nodes) {
        assert_eq!(rec, &explain_instance(&model, &g, v, &cfg).unwrap());
    }
}
