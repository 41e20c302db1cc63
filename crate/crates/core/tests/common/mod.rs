//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use hyperexplain::autodiff::{finite_difference_check, Tape, Var};
use hyperexplain::explain::ExplainConfig;
use hyperexplain::hypergraph::Split;
use hyperexplain::model::{fit, HyperGnn, ModelConfig, TrainConfig};
use hyperexplain::rng;
use hyperexplain::tensor::{softmax, Tensor};
use hyperexplain::{computational_subhypergraph, Hypergraph, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal_tensor(r: &mut rng::Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(r)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

const SEG3: [usize; 3] = [0, 0, 1];
const SPREAD: [usize; 3] = [0, 1, 1];
const ROWS: [usize; 3] = [0, 1, 2];
const LABELS: [usize; 3] = [1, 0, 1];

/// Worst finite-difference discrepancy of a random program built from `seed`.
///
/// The program maps a `3x4` input through a linear layer with bias to a pool of
/// `3x2` values, applies 2 to 7 random ops drawn from the tape's vocabulary and
/// reduces with a random scalar loss.
pub fn random_program_error(seed: u64) -> f64 {
    let mut r = rng::seeded(seed);
    let inputs = vec![
        normal_tensor(&mut r, 3, 4),
        normal_tensor(&mut r, 4, 2),
        normal_tensor(&mut r, 1, 2),
        normal_tensor(&mut r, 3, 1),
        normal_tensor(&mut r, 3, 2),
        Tensor::new(3, 1, (0..3).map(|_| r.gen_range(0.1..1.0)).collect()).unwrap(),
    ];
    let n_ops = r.gen_range(2..=7);
    let ops: Vec<(u8, usize, usize)> =
        (0..n_ops).map(|i| (r.gen_range(0..11u8), r.gen_range(0..i + 2), r.gen_range(0..i + 2))).collect();
    let loss_kind = r.gen_range(0..3u8);
    let program = |t: &mut Tape<'_>, x: &[Var]| -> Result<Var> {
        let h = t.matmul(x[0], x[1])?;
        let h = t.add_bias(h, x[2])?;
        let mut pool = vec![h, x[4]];
        for &(op, a, b) in &ops {
            let (a, b) = (pool[a % pool.len()], pool[b % pool.len()]);
            let v = match op {
                0 => t.relu(a),
                1 => t.sigmoid(a),
                2 => {
                    let s = t.affine(a, 0.3, 0.0);
                    t.exp(s)
                }
                3 => {
                    let s = t.sigmoid(a);
                    t.log(s)
                }
                4 => t.mul(a, b)?,
                5 => t.add(a, b)?,
                6 => t.scale_rows(a, x[3])?,
                7 => t.clamp(a, -1.0, 1.0),
                8 => {
                    let s = t.segment_sum(a, &SEG3, 2)?;
                    t.gather(s, &SPREAD)?
                }
                9 => {
                    let w = t.constant(Tensor::column(vec![1.0, -0.5]));
                    let score = t.matmul(a, w)?;
                    let sm = t.segment_softmax(score, Some(x[5]), &SEG3, 2)?;
                    t.scale_rows(a, sm)?
                }
                _ => t.affine(a, -0.7, 0.2),
            };
            pool.push(v);
        }
        let last = *pool.last().unwrap();
        match loss_kind {
            0 => {
                let sq = t.mul(last, last)?;
                Ok(t.sum(sq))
            }
            1 => t.softmax_cross_entropy(last, &ROWS, &LABELS),
            _ => {
                let target = t.constant(Tensor::from_rows(&[vec![0.3, 0.7], vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap());
                t.kl_softmax(last, target)
            }
        }
    };
    finite_difference_check(program, &inputs, 1e-6).unwrap()
}

/// Random hypergraph with `n` nodes, `m` hyperedges of 1 to `max_size` distinct
/// members, normal features, labels in `0..classes` and an alternating split.
pub fn random_hypergraph(seed: u64, n: usize, m: usize, max_size: usize, dim: usize, classes: usize) -> Hypergraph {
    let mut r = rng::seeded(seed);
    let edges: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let k = r.gen_range(1..=max_size.min(n));
            rand::seq::index::sample(&mut r, n, k).into_vec()
        })
        .collect();
    let feats = normal_tensor(&mut r, n, dim);
    let labels = (0..n).map(|_| r.gen_range(0..classes)).collect();
    let split = (0..n).map(|v| if v % 3 == 2 { Split::Val } else { Split::Train }).collect();
    Hypergraph::from_hyperedges(n, &edges, feats, Some(labels), Some(split)).unwrap()
}

/// Class distribution of `v` under a mask over all links of the parent.
pub fn parent_prediction(model: &HyperGnn, g: &Hypergraph, v: usize, kept: &[usize]) -> Vec<f64> {
    let mut mask = vec![0.0; g.num_links()];
    for &l in kept {
        mask[l] = 1.0;
    }
    let logits = model.logits(g.incidence(), g.features(), &mask).unwrap();
    softmax(logits.row_slice(v))
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| if a > 0.0 { a * (a.max(1e-12).ln() - b.max(1e-12).ln()) } else { 0.0 }).sum()
}

/// Minimum of `lambda_pred * KL + lambda_size * |S|` over every subset `S` of
/// the receptive field of `v`, evaluated by masking the full parent hypergraph.
pub fn exhaustive_best_loss(model: &HyperGnn, g: &Hypergraph, v: usize, cfg: &ExplainConfig) -> f64 {
    let comp = computational_subhypergraph(g, v, model.num_layers()).unwrap();
    let links = comp.links().to_vec();
    assert!(links.len() <= 16, "exhaustive search over {} links", links.len());
    let reference = parent_prediction(model, g, v, &links);
    let mut best = f64::INFINITY;
    for bits in 0u32..(1 << links.len()) {
        let kept: Vec<usize> = (0..links.len()).filter(|i| bits >> i & 1 == 1).map(|i| links[i]).collect();
        let p = parent_prediction(model, g, v, &kept);
        best = best.min(cfg.lambda_pred * kl(&p, &reference) + cfg.lambda_size * kept.len() as f64);
    }
    best
}

/// A small two-layer model trained on a sparse random hypergraph, and the nodes
/// whose receptive fields have between 3 and `max_links` links.
pub fn tiny_oracle_setup(seed: u64, max_links: usize) -> (HyperGnn, Hypergraph, Vec<usize>) {
    let g = random_hypergraph(seed, 40, 14, 3, 4, 2);
    let arch = ModelConfig::for_hypergraph(&g).with_layers(2).with_hidden(8);
    let (model, _) = fit(&g, arch, &TrainConfig { epochs: 300, learning_rate: 0.01, seed, ..TrainConfig::default() }).unwrap();
    let nodes = (0..g.num_nodes())
        .filter(|&v| {
            let s = computational_subhypergraph(&g, v, model.num_layers()).unwrap().size();
            (3..=max_links).contains(&s)
        })
        .collect();
    (model, g, nodes)
}

/// Tiny labelled dataset spec: a 15-node tree base with five cycles.
pub fn tiny_spec_json() -> &'static str {
    r#"{
  "base_kind": "tree",
  "motif_kind": "cycle",
  "target_base_nodes": 15,
  "num_motifs": 5,
  "num_perturbations": 3,
  "num_communities": 1,
  "num_inter_community_edges": 0,
  "feature_kind": "ones",
  "feature_dim": 4,
  "seed": 7
}"#
}

/// Outcome of the exhaustive-search comparison on one instance.
pub struct OracleCase {
    pub setup: u64,
    pub node: usize,
    pub comp_size: usize,
    pub optimum: f64,
    pub best_loss: f64,
}

/// 20 instances drawn with a fixed seed from the qualifying nodes of setups
/// 0..5, each compared with the exhaustive optimum under the default config.
pub fn oracle_cases() -> Vec<OracleCase> {
    use rand::seq::SliceRandom;
    let cfg = ExplainConfig::default();
    let setups: Vec<_> = (0..5).map(|s| tiny_oracle_setup(s, 10)).collect();
    let pool: Vec<(usize, usize)> =
        setups.iter().enumerate().flat_map(|(i, (_, _, nodes))| nodes.iter().map(move |&v| (i, v))).collect();
    let mut picked: Vec<(usize, usize)> = pool.choose_multiple(&mut rng::seeded(0), 20).copied().collect();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|(i, v)| {
            let (model, g, _) = &setups[i];
            let record = hyperexplain::explain::explain_instance(model, g, v, &cfg).unwrap();
            OracleCase {
                setup: i as u64,
                node: v,
                comp_size: record.comp_size,
                optimum: exhaustive_best_loss(model, g, v, &cfg),
                best_loss: record.best_loss.unwrap(),
            }
        })
        .collect()
}
