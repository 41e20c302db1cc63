//! Instance-level explanations: search over subhypergraphs of a node's receptive
//! field for one that reproduces the model's prediction with few links.
//!
//! The search space is parametrized by an independent keep-probability per link
//! of `G_comp`. Three samplers are available:
//!
//! * [`Sampler::Gumbel`] draws a binary Gumbel-Softmax sample per link, runs the
//!   model on the hard sample and backpropagates through the relaxed sample
//!   (straight-through). The lowest hard loss seen over all epochs wins.
//! * [`Sampler::RelaxThresh`] feeds `sigmoid(logit)` to the model directly, adds
//!   an entropy penalty and thresholds the final mask.
//! * [`Sampler::Sparsemax`] replaces the sigmoid by a two-class sparsemax over
//!   `(logit, 0)`, which reaches exact zeros and ones.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var, LOG_EPS};
use crate::error::{Error, Result};
use crate::hypergraph::{computational_subhypergraph, CompactView, Hypergraph, Subhypergraph};
use crate::model::HyperGnn;
use crate::optim::{Adam, AdamConfig};
use crate::rng::{self, Rng};
use crate::tensor::{softmax, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Gumbel,
    RelaxThresh,
    Sparsemax,
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gumbel" => Ok(Self::Gumbel),
            "relax_thresh" | "relax-thresh" => Ok(Self::RelaxThresh),
            "sparsemax" => Ok(Self::Sparsemax),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub lambda_pred: f64,
    pub lambda_size: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub init_prob: f64,
    pub sampler: Sampler,
    pub seed: u64,
    /// Weight of the summed binary entropy of the mask (relax and sparsemax only).
    pub entropy_weight: f64,
    /// Binarization threshold for the final relaxed mask (relax and sparsemax only).
    pub threshold: f64,
    /// Gumbel only: run the model on the hard sample (`true`) or on the relaxed one.
    pub straight_through: bool,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            lambda_pred: 1.0,
            lambda_size: 0.05,
            epochs: 400,
            learning_rate: 0.01,
            temperature: 1.0,
            init_prob: 0.95,
            sampler: Sampler::Gumbel,
            seed: 0,
            entropy_weight: 0.1,
            threshold: 0.5,
            straight_through: true,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_pred < 0.0 || self.lambda_size < 0.0 {
            return Err(Error::InvalidConfig("loss weights must be nonnegative".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidConfig("temperature must be positive".into()));
        }
        if !(self.init_prob > 0.0 && self.init_prob < 1.0) {
            return Err(Error::InvalidConfig("init_prob must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn adam(&self) -> Adam {
        Adam::new(AdamConfig::with_lr(self.learning_rate))
    }
}

/// Explanation of one node: the post-processed subhypergraph plus the search trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub node: usize,
    pub method: String,
    /// Kept parent link indices, sorted.
    pub links: Vec<usize>,
    /// The kept links as `[node, hyperedge]` pairs.
    pub pairs: Vec<[usize; 2]>,
    /// Number of links of the node's receptive field.
    pub comp_size: usize,
    pub best_loss: Option<f64>,
    pub loss_trace: Vec<f64>,
    /// Parent link indices of the selected mask before component post-processing.
    pub sampled_links: Vec<usize>,
}

impl ExplanationRecord {
    pub fn new(g: &Hypergraph, node: usize, method: &str, explanation: &Subhypergraph<'_>, comp_size: usize) -> Self {
        let links = explanation.links().to_vec();
        Self {
            node,
            method: method.to_string(),
            pairs: links.iter().map(|&l| [g.link(l).node, g.link(l).hyperedge]).collect(),
            links: links.clone(),
            comp_size,
            best_loss: None,
            loss_trace: Vec::new(),
            sampled_links: links,
        }
    }

    pub fn subhypergraph<'g>(&self, g: &'g Hypergraph) -> Result<Subhypergraph<'g>> {
        Subhypergraph::new(g, self.links.clone(), Some(self.node))
    }

    pub fn size(&self) -> usize {
        self.links.len()
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|&x| !(x >= -1e-12)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::NotADistribution(format!("{p:?}")));
    }
    Ok(())
}

/// `lambda_pred * KL(p_sub || p_comp) + lambda_size * sub_size`.
pub fn explanation_loss(p_sub: &[f64], p_comp: &[f64], sub_size: f64, lambda_pred: f64, lambda_size: f64) -> Result<f64> {
    check_distribution(p_sub)?;
    check_distribution(p_comp)?;
    if p_sub.len() != p_comp.len() {
        return Err(Error::LengthMismatch(p_sub.len(), p_comp.len()));
    }
    Ok(lambda_pred * kl(p_sub, p_comp) + lambda_size * sub_size)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| a * (a.max(LOG_EPS).ln() - b.max(LOG_EPS).ln())).sum()
}

/// Keep-probability logits over the links of a receptive field.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkDistribution {
    /// Number of links of the parent hypergraph.
    pub num_parent_links: usize,
    /// Parent link indices of the support, sorted.
    pub support: Vec<usize>,
    pub logits: Vec<f64>,
}

impl LinkDistribution {
    pub fn uniform(comp: &Subhypergraph<'_>, init_prob: f64) -> Self {
        let logit = (init_prob / (1.0 - init_prob)).ln();
        Self { num_parent_links: comp.parent().num_links(), support: comp.links().to_vec(), logits: vec![logit; comp.size()] }
    }

    /// Keep probability of every parent link; zero off the support.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.num_parent_links];
        for (&l, &t) in self.support.iter().zip(&self.logits) {
            p[l] = sigmoid(t);
        }
        p
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Logistic noise `g1 - g2` of two independent standard Gumbel draws.
fn logistic_noise(rng: &mut Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    u.ln() - (1.0 - u).ln()
}

/// One binary Gumbel-Softmax draw per support link, returned as parent-length
/// `(hard, soft)` masks.
pub fn sample_gumbel(dist: &LinkDistribution, temperature: f64, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let mut hard = vec![0.0; dist.num_parent_links];
    let mut soft = vec![0.0; dist.num_parent_links];
    for (&l, &t) in dist.support.iter().zip(&dist.logits) {
        let s = sigmoid((t + logistic_noise(rng)) / temperature);
        soft[l] = s;
        hard[l] = if s > 0.5 { 1.0 } else { 0.0 };
    }
    (hard, soft)
}

/// Euclidean projection onto the probability simplex.
pub fn sparsemax(z: &[f64]) -> Vec<f64> {
    if z.is_empty() {
        return Vec::new();
    }
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if x > t {
            tau = t;
        }
    }
    z.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Model and receptive field of one instance, laid out on the compact view.
pub struct Instance<'m> {
    pub model: &'m HyperGnn,
    pub node: usize,
    pub view: CompactView,
    pub focus: usize,
    pub p_comp: Vec<f64>,
    params: Vec<Tensor>,
    node_links: Vec<Vec<usize>>,
    edge_links: Vec<Vec<usize>>,
}

impl<'m> Instance<'m> {
    pub fn new(model: &'m HyperGnn, g: &Hypergraph, node: usize) -> Result<Self> {
        let comp = computational_subhypergraph(g, node, model.num_layers())?;
        let view = comp.compact();
        let focus = view.focus.expect("receptive field has a focus");
        let probs = model.forward(&view.incidence, &view.features, &vec![1.0; view.num_links()])?;
        let p_comp = probs.row_slice(focus).to_vec();
        let inc = &view.incidence;
        let mut node_links = vec![Vec::new(); inc.num_nodes];
        let mut edge_links = vec![Vec::new(); inc.num_hyperedges];
        for l in 0..inc.num_links() {
            node_links[inc.link_node[l]].push(l);
            edge_links[inc.link_edge[l]].push(l);
        }
        Ok(Self { model, node, view, focus, p_comp, params: model.params().to_vec(), node_links, edge_links })
    }

    pub fn num_links(&self) -> usize {
        self.view.num_links()
    }

    /// Class distribution at the focus node under a local mask.
    pub fn predict(&self, local_mask: &[f64]) -> Result<Vec<f64>> {
        let logits = self.model.logits(&self.view.incidence, &self.view.features, local_mask)?;
        Ok(softmax(logits.row_slice(self.focus)))
    }

    /// Exact loss of a binary local mask.
    pub fn hard_loss(&self, local_mask: &[f64], cfg: &ExplainConfig) -> Result<f64> {
        let p = self.predict(local_mask)?;
        let size = local_mask.iter().sum();
        explanation_loss(&p, &self.p_comp, size, cfg.lambda_pred, cfg.lambda_size)
    }

    /// Records the focus node's KL term against the receptive-field prediction.
    fn record_kl<'a>(&'a self, tape: &mut Tape<'a>, mask: Var, focus_idx: &'a [usize]) -> Result<Var> {
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let x = tape.constant(self.view.features.clone());
        let rec = self.model.record(tape, &params, &self.view.incidence, x, mask)?;
        let row = tape.gather(rec.logits, focus_idx)?;
        let target = tape.constant(Tensor::row(self.p_comp.clone()));
        tape.kl_softmax(row, target)
    }

    /// The part of a binary local mask connected to the focus node. The focus
    /// prediction only sees these links, so both masks give the same KL term.
    pub fn component(&self, local_mask: &[f64]) -> Vec<f64> {
        let inc = &self.view.incidence;
        let mut out = vec![0.0; local_mask.len()];
        let mut seen_node = vec![false; inc.num_nodes];
        let mut seen_edge = vec![false; inc.num_hyperedges];
        seen_node[self.focus] = true;
        let mut stack = vec![self.focus];
        while let Some(u) = stack.pop() {
            for &l in &self.node_links[u] {
                let e = inc.link_edge[l];
                if local_mask[l] <= 0.5 || seen_edge[e] {
                    continue;
                }
                seen_edge[e] = true;
                for &k in &self.edge_links[e] {
                    if local_mask[k] > 0.5 {
                        out[k] = 1.0;
                        let w = inc.link_node[k];
                        if !seen_node[w] {
                            seen_node[w] = true;
                            stack.push(w);
                        }
                    }
                }
            }
        }
        out
    }

    fn to_parent(&self, local_mask: &[f64]) -> Vec<usize> {
        local_mask.iter().zip(&self.view.link_map).filter(|(&m, _)| m > 0.5).map(|(_, &l)| l).collect()
    }
}

struct Outcome {
    /// Selected mask before component reduction.
    raw_mask: Vec<f64>,
    best_mask: Vec<f64>,
    best_loss: f64,
    trace: Vec<f64>,
}

fn run_gumbel(inst: &Instance<'_>, cfg: &ExplainConfig, rng: &mut Rng) -> Result<Outcome> {
    let n = inst.num_links();
    let init = (cfg.init_prob / (1.0 - cfg.init_prob)).ln();
    let mut theta = vec![Tensor::column(vec![init; n])];
    let mut opt = cfg.adam();
    let focus_idx = [inst.focus];
    let mut best = Outcome { raw_mask: vec![1.0; n], best_mask: vec![1.0; n], best_loss: f64::INFINITY, trace: Vec::with_capacity(cfg.epochs) };
    for _ in 0..cfg.epochs {
        let noise: Vec<f64> = (0..n).map(|_| logistic_noise(rng)).collect();
        let mut tape = Tape::new();
        let t = tape.leaf(theta[0].clone());
        let eps = tape.constant(Tensor::column(noise));
        let z = tape.add(t, eps)?;
        let z = tape.affine(z, 1.0 / cfg.temperature, 0.0);
        let soft = tape.sigmoid(z);
        let hard = tape.straight_through(soft);
        let mask = if cfg.straight_through { hard } else { soft };
        let kl_var = inst.record_kl(&mut tape, mask, &focus_idx)?;
        let size = tape.sum(soft);
        let a = tape.affine(kl_var, cfg.lambda_pred, 0.0);
        let b = tape.affine(size, cfg.lambda_size, 0.0);
        let loss = tape.add(a, b)?;

        let raw = tape.value(hard).data();
        let hard_mask = inst.component(raw);
        let hard_loss = if cfg.straight_through {
            cfg.lambda_pred * tape.value(kl_var).item() + cfg.lambda_size * hard_mask.iter().sum::<f64>()
        } else {
            inst.hard_loss(&hard_mask, cfg)?
        };
        best.trace.push(hard_loss);
        if hard_loss < best.best_loss {
            best.best_loss = hard_loss;
            best.raw_mask = raw.to_vec();
            best.best_mask = hard_mask;
        }
        let grads = tape.backward(loss)?;
        opt.step(&mut theta, &[grads.get_or_zeros(t, (n, 1))]);
    }
    Ok(best)
}

fn run_relaxed(inst: &Instance<'_>, cfg: &ExplainConfig) -> Result<Outcome> {
    let n = inst.num_links();
    let init = match cfg.sampler {
        Sampler::Sparsemax => 2.0 * cfg.init_prob - 1.0,
        _ => (cfg.init_prob / (1.0 - cfg.init_prob)).ln(),
    };
    let mut theta = vec![Tensor::column(vec![init; n])];
    let mut opt = cfg.adam();
    let focus_idx = [inst.focus];
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut last = vec![init; n];
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let t = tape.leaf(theta[0].clone());
        let m = keep_probability(&mut tape, t, cfg.sampler);
        let kl_var = inst.record_kl(&mut tape, m, &focus_idx)?;
        let size = tape.sum(m);
        let ent = binary_entropy(&mut tape, m)?;
        let a = tape.affine(kl_var, cfg.lambda_pred, 0.0);
        let b = tape.affine(size, cfg.lambda_size, 0.0);
        let c = tape.affine(ent, cfg.entropy_weight, 0.0);
        let ab = tape.add(a, b)?;
        let loss = tape.add(ab, c)?;
        trace.push(tape.value(loss).item());
        let grads = tape.backward(loss)?;
        opt.step(&mut theta, &[grads.get_or_zeros(t, (n, 1))]);
        last = theta[0].data().to_vec();
    }
    let probs: Vec<f64> = last
        .iter()
        .map(|&x| match cfg.sampler {
            Sampler::Sparsemax => sparsemax(&[x, 0.0])[0],
            _ => sigmoid(x),
        })
        .collect();
    let raw_mask: Vec<f64> = probs.iter().map(|&p| if p > cfg.threshold { 1.0 } else { 0.0 }).collect();
    let best_mask = inst.component(&raw_mask);
    let best_loss = inst.hard_loss(&best_mask, cfg)?;
    Ok(Outcome { raw_mask, best_mask, best_loss, trace })
}

fn keep_probability(tape: &mut Tape<'_>, theta: Var, sampler: Sampler) -> Var {
    match sampler {
        // first coordinate of sparsemax((theta, 0))
        Sampler::Sparsemax => {
            let half = tape.affine(theta, 0.5, 0.5);
            tape.clamp(half, 0.0, 1.0)
        }
        _ => tape.sigmoid(theta),
    }
}

/// `sum_i -m_i ln m_i - (1 - m_i) ln(1 - m_i)`.
fn binary_entropy(tape: &mut Tape<'_>, m: Var) -> Result<Var> {
    let one_minus = tape.affine(m, -1.0, 1.0);
    let log_m = tape.log(m);
    let log_1m = tape.log(one_minus);
    let a = tape.mul(m, log_m)?;
    let b = tape.mul(one_minus, log_1m)?;
    let s = tape.add(a, b)?;
    let s = tape.sum(s);
    Ok(tape.affine(s, -1.0, 0.0))
}

/// Explains node `v` with the configured sampler.
pub fn explain_instance(model: &HyperGnn, g: &Hypergraph, v: usize, cfg: &ExplainConfig) -> Result<ExplanationRecord> {
    cfg.validate()?;
    let inst = Instance::new(model, g, v)?;
    let outcome = if inst.num_links() == 0 {
        let best_loss = inst.hard_loss(&[], cfg)?;
        Outcome { raw_mask: Vec::new(), best_mask: Vec::new(), best_loss, trace: Vec::new() }
    } else {
        match cfg.sampler {
            Sampler::Gumbel => run_gumbel(&inst, cfg, &mut rng::seeded(rng::derive(cfg.seed, v as u64)))?,
            Sampler::RelaxThresh | Sampler::Sparsemax => run_relaxed(&inst, cfg)?,
        }
    };
    let sampled = inst.to_parent(&outcome.raw_mask);
    let explanation = Subhypergraph::new(g, inst.to_parent(&outcome.best_mask), Some(v))?;
    let mut record = ExplanationRecord::new(g, v, sampler_name(cfg.sampler), &explanation, inst.num_links());
    record.best_loss = Some(outcome.best_loss);
    record.loss_trace = outcome.trace;
    record.sampled_links = sampled;
    Ok(record)
}

/// Same as [`explain_instance`] with the relax-and-thresh sampler.
pub fn relax_and_thresh(model: &HyperGnn, g: &Hypergraph, v: usize, cfg: &ExplainConfig) -> Result<ExplanationRecord> {
    explain_instance(model, g, v, &ExplainConfig { sampler: Sampler::RelaxThresh, ..cfg.clone() })
}

fn sampler_name(s: Sampler) -> &'static str {
    match s {
        Sampler::Gumbel => "shypx",
        Sampler::RelaxThresh => "relax_thresh",
        Sampler::Sparsemax => "sparsemax",
    }
}

/// Explains every node in `nodes` in parallel; results follow the input order.
pub fn explain_nodes(model: &HyperGnn, g: &Hypergraph, nodes: &[usize], cfg: &ExplainConfig) -> Result<Vec<ExplanationRecord>> {
    nodes.par_iter().map(|&v| explain_instance(model, g, v, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        let p = [0.3, 0.7];
        assert_eq!(explanation_loss(&p, &p, 0.0, 1.0, 1.0).unwrap(), 0.0);
        let l = explanation_loss(&[1.0, 0.0], &[0.5, 0.5], 3.0, 1.0, 0.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let l = explanation_loss(&p, &p, 19.5, 1.0, 0.005).unwrap();
        assert!((l - 0.0975).abs() < 1e-12);
        assert!(matches!(explanation_loss(&[0.5, 0.6], &p, 0.0, 1.0, 1.0), Err(Error::NotADistribution(_))));
    }

    #[test]
    fn sparsemax_cases() {
        assert_eq!(sparsemax(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(sparsemax(&[1.0, 0.0]), vec![1.0, 0.0]);
        let p = sparsemax(&[0.6, 0.6, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12 && p[2] == 0.0);
    }

    #[test]
    fn two_class_sparsemax_matches_clamped_affine() {
        for i in -30..=30 {
            let t = i as f64 / 10.0;
            let expected = ((t + 1.0) / 2.0).clamp(0.0, 1.0);
            assert!((sparsemax(&[t, 0.0])[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn gumbel_keep_frequency() {
        let g = crate::hypergraph::tests::two_edge_graph();
        let comp = Subhypergraph::new(&g, vec![0, 1, 2], Some(0)).unwrap();
        let mut dist = LinkDistribution::uniform(&comp, 0.5);
        let mut r = rng::seeded(1);
        let mut kept = 0.0;
        for _ in 0..10_000 {
            let (hard, soft) = sample_gumbel(&dist, 1.0, &mut r);
            kept += hard[0];
            assert_eq!((hard[3], hard[4], soft[3], soft[4]), (0.0, 0.0, 0.0, 0.0));
        }
        assert!((kept / 10_000.0 - 0.5).abs() < 0.02);
        dist.logits = vec![1e6; 3];
        let (hard, _) = sample_gumbel(&dist, 1.0, &mut r);
        assert_eq!(&hard[..3], &[1.0, 1.0, 1.0]);
        assert_eq!(dist.probabilities()[4], 0.0);
    }

    #[test]
    fn uniform_init_matches_probability() {
        let g = crate::hypergraph::tests::two_edge_graph();
        let comp = Subhypergraph::full(&g).with_focus(Some(0));
        let dist = LinkDistribution::uniform(&comp, 0.95);
        assert!(dist.probabilities().iter().all(|&p| (p - 0.95).abs() < 1e-12));
    }

    #[test]
    fn entropy_vanishes_at_endpoints() {
        let mut tape = Tape::new();
        let m = tape.constant(Tensor::column(vec![0.0, 1.0, 1.0]));
        let h = binary_entropy(&mut tape, m).unwrap();
        assert_eq!(tape.value(h).item(), 0.0);
        let m = tape.constant(Tensor::column(vec![0.5]));
        let h = binary_entropy(&mut tape, m).unwrap();
        assert!((tape.value(h).item() - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
