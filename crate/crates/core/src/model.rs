//! Two-stage message-passing hypergraph network with per-link masks.
//!
//! Each layer first forms hyperedge states from their members,
//! `h_e = phi(sum_{v in e} m_ve z_v)`, then updates nodes from their own state and
//! incident hyperedges, `z_v' = psi(z_v, sum_{e ni v} m_ve h_e)`. `phi` is a
//! one-hidden-layer perceptron and `psi` a one-hidden-layer perceptron over the
//! pair, all with relu. The mask `m` multiplies every message in both
//! directions, so a zero entry removes the link exactly and a node whose links
//! are all masked is updated from its own state alone.
//!
//! With [`Aggregation::Attention`] each masked sum becomes a masked
//! segment-softmax weighting rescaled by the masked segment size:
//! `sum_i m_i z_i` turns into `(sum_j m_j) * sum_i alpha_i z_i` with
//! `alpha_i = m_i exp(s_i) / sum_j m_j exp(s_j)`. Uniform scores recover the plain
//! sum, which keeps the model able to count neighbours on featureless inputs.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, Incidence, Split};
use crate::optim::{Adam, AdamConfig};
use crate::rng;
use crate::tensor::{argmax, softmax, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Attention,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_classes: usize,
    pub aggregation: Aggregation,
}

impl ModelConfig {
    /// Three layers of width 16 with sum aggregation.
    pub fn new(feature_dim: usize, num_classes: usize) -> Self {
        Self { feature_dim, hidden_dim: 16, num_layers: 3, num_classes, aggregation: Aggregation::Sum }
    }

    pub fn for_hypergraph(g: &Hypergraph) -> Self {
        Self::new(g.feature_dim(), g.num_classes())
    }

    pub fn with_aggregation(mut self, aggregation: Aggregation) -> Self {
        self.aggregation = aggregation;
        self
    }

    pub fn with_layers(mut self, num_layers: usize) -> Self {
        self.num_layers = num_layers;
        self
    }

    pub fn with_hidden(mut self, hidden_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self
    }

    /// Names and shapes of every parameter tensor, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, usize, usize)> {
        let h = self.hidden_dim;
        let mut out = Vec::new();
        for l in 0..self.num_layers {
            let d = if l == 0 { self.feature_dim } else { h };
            let mut push = |name: &str, r: usize, c: usize| out.push((format!("layer{l}.{name}"), r, c));
            push("edge_w1", d, h);
            push("edge_b1", 1, h);
            push("edge_w2", h, h);
            push("edge_b2", 1, h);
            push("node_self", d, h);
            push("node_msg", h, h);
            push("node_b1", 1, h);
            push("node_w2", h, h);
            push("node_b2", 1, h);
            if self.aggregation == Aggregation::Attention {
                push("node_score", d, 1);
                push("edge_score", h, 1);
            }
        }
        out.push(("classifier_w".into(), h, self.num_classes));
        out.push(("classifier_b".into(), 1, self.num_classes));
        out
    }

    fn per_layer(&self) -> usize {
        if self.aggregation == Aggregation::Attention {
            11
        } else {
            9
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig(format!("degenerate model config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperGnn {
    config: ModelConfig,
    params: Vec<Tensor>,
}

/// Handles into a recorded forward pass.
pub struct Recorded {
    pub logits: Var,
    pub embeddings: Var,
    /// Per layer: (node-to-hyperedge, hyperedge-to-node) attention weights, `L x 1`.
    pub attention: Vec<(Var, Var)>,
}

impl HyperGnn {
    /// Glorot-uniform weights and zero biases drawn from a seeded stream.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::seeded(seed);
        let params = config
            .param_shapes()
            .into_iter()
            .map(|(name, rows, cols)| {
                if name.contains("_b") {
                    Tensor::zeros(rows, cols)
                } else {
                    let bound = (6.0 / (rows + cols) as f64).sqrt();
                    let data = (0..rows * cols).map(|_| r.gen_range(-bound..bound)).collect();
                    Tensor::new(rows, cols, data).expect("shape from config")
                }
            })
            .collect();
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::ShapeMismatch(format!("{} parameter tensors, expected {}", params.len(), shapes.len())));
        }
        for ((name, r, c), p) in shapes.iter().zip(&params) {
            if p.shape() != (*r, *c) {
                return Err(Error::ShapeMismatch(format!("{name}: {:?} vs {r}x{c}", p.shape())));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_layers(&self) -> usize {
        self.config.num_layers
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    fn check_inputs(&self, inc: &Incidence, features: &Tensor, mask_len: usize) -> Result<()> {
        if features.rows() != inc.num_nodes || features.cols() != self.config.feature_dim {
            return Err(Error::ShapeMismatch(format!(
                "features {}x{} for {} nodes of dimension {}",
                features.rows(),
                features.cols(),
                inc.num_nodes,
                self.config.feature_dim
            )));
        }
        if mask_len != inc.num_links() {
            return Err(Error::ShapeMismatch(format!("mask of length {mask_len} for {} links", inc.num_links())));
        }
        Ok(())
    }

    /// Records the forward pass on `tape`. `params` must follow
    /// [`ModelConfig::param_shapes`]; `mask` is an `L x 1` variable.
    pub fn record<'a>(
        &self,
        tape: &mut Tape<'a>,
        params: &[Var],
        inc: &'a Incidence,
        features: Var,
        mask: Var,
    ) -> Result<Recorded> {
        let cfg = &self.config;
        let (n, e) = (inc.num_nodes, inc.num_hyperedges);
        let attn = cfg.aggregation == Aggregation::Attention;
        let mut z = features;
        let mut attention = Vec::new();
        // masked segment sizes, shared by all attention layers
        let counts = if attn {
            let per_edge = tape.segment_sum(mask, &inc.link_edge, e)?;
            let per_node = tape.segment_sum(mask, &inc.link_node, n)?;
            Some((tape.gather(per_edge, &inc.link_edge)?, tape.gather(per_node, &inc.link_node)?))
        } else {
            None
        };
        for l in 0..cfg.num_layers {
            let p = &params[l * cfg.per_layer()..(l + 1) * cfg.per_layer()];
            let zg = tape.gather(z, &inc.link_node)?;
            let (to_edge, alpha) = match counts {
                Some((edge_count, _)) => {
                    let s = tape.matmul(zg, p[9])?;
                    let a = tape.segment_softmax(s, Some(mask), &inc.link_edge, e)?;
                    (tape.mul(a, edge_count)?, Some(a))
                }
                None => (mask, None),
            };
            let msg = tape.scale_rows(zg, to_edge)?;
            let agg = tape.segment_sum(msg, &inc.link_edge, e)?;
            let hidden = tape.matmul(agg, p[0])?;
            let hidden = tape.add_bias(hidden, p[1])?;
            let hidden = tape.relu(hidden);
            let h = tape.matmul(hidden, p[2])?;
            let h = tape.add_bias(h, p[3])?;

            let hg = tape.gather(h, &inc.link_edge)?;
            let (to_node, beta) = match counts {
                Some((_, node_count)) => {
                    let s = tape.matmul(hg, p[10])?;
                    let b = tape.segment_softmax(s, Some(mask), &inc.link_node, n)?;
                    (tape.mul(b, node_count)?, Some(b))
                }
                None => (mask, None),
            };
            let msg = tape.scale_rows(hg, to_node)?;
            let m = tape.segment_sum(msg, &inc.link_node, n)?;

            let own = tape.matmul(z, p[4])?;
            let nb = tape.matmul(m, p[5])?;
            let pre = tape.add(own, nb)?;
            let pre = tape.add_bias(pre, p[6])?;
            let hidden = tape.relu(pre);
            let out = tape.matmul(hidden, p[7])?;
            let out = tape.add_bias(out, p[8])?;
            z = tape.relu(out);
            if let (Some(a), Some(b)) = (alpha, beta) {
                attention.push((a, b));
            }
        }
        let k = params.len();
        let logits = tape.matmul(z, params[k - 2])?;
        let logits = tape.add_bias(logits, params[k - 1])?;
        Ok(Recorded { logits, embeddings: z, attention })
    }

    fn run(&self, inc: &Incidence, features: &Tensor, mask: &[f64]) -> Result<(Tensor, Tensor, Vec<(Vec<f64>, Vec<f64>)>)> {
        self.check_inputs(inc, features, mask.len())?;
        let mut tape = Tape::new();
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let x = tape.constant(features.clone());
        let m = tape.constant(Tensor::column(mask.to_vec()));
        let rec = self.record(&mut tape, &params, inc, x, m)?;
        let attn = rec
            .attention
            .iter()
            .map(|&(a, b)| (tape.value(a).data().to_vec(), tape.value(b).data().to_vec()))
            .collect();
        Ok((tape.value(rec.logits).clone(), tape.value(rec.embeddings).clone(), attn))
    }

    /// Final logits for every node.
    pub fn logits(&self, inc: &Incidence, features: &Tensor, mask: &[f64]) -> Result<Tensor> {
        Ok(self.run(inc, features, mask)?.0)
    }

    /// Per-node class probabilities under the given link mask.
    pub fn forward(&self, inc: &Incidence, features: &Tensor, mask: &[f64]) -> Result<Tensor> {
        let logits = self.logits(inc, features, mask)?;
        let rows: Vec<Vec<f64>> = (0..logits.rows()).map(|r| softmax(logits.row_slice(r))).collect();
        if rows.is_empty() {
            return Ok(Tensor::zeros(0, self.config.num_classes));
        }
        Tensor::from_rows(&rows)
    }

    /// Probabilities over the full hypergraph.
    pub fn forward_full(&self, g: &Hypergraph) -> Result<Tensor> {
        self.forward(g.incidence(), g.features(), &vec![1.0; g.num_links()])
    }

    /// Final-layer node states (pre-classifier) under the all-ones mask.
    pub fn node_embeddings(&self, g: &Hypergraph) -> Result<Tensor> {
        Ok(self.run(g.incidence(), g.features(), &vec![1.0; g.num_links()])?.1)
    }

    /// Predicted class of every node; ties go to the lowest class index.
    pub fn predict(&self, g: &Hypergraph) -> Result<Vec<usize>> {
        let p = self.forward_full(g)?;
        Ok((0..p.rows()).map(|r| argmax(p.row_slice(r))).collect())
    }

    /// Mean over layers and both message directions of the softmax attention each
    /// link receives under the all-ones mask.
    pub fn attention_weights(&self, inc: &Incidence, features: &Tensor) -> Result<Vec<f64>> {
        if self.config.aggregation != Aggregation::Attention {
            return Err(Error::NotAnAttentionModel);
        }
        let (_, _, attn) = self.run(inc, features, &vec![1.0; inc.num_links()])?;
        let mut out = vec![0.0; inc.num_links()];
        let denom = (2 * attn.len()) as f64;
        for (a, b) in &attn {
            for (i, o) in out.iter_mut().enumerate() {
                *o += (a[i] + b[i]) / denom;
            }
        }
        Ok(out)
    }

    /// Per-layer `(node-to-hyperedge, hyperedge-to-node)` attention under the all-ones mask.
    pub fn attention_by_layer(&self, inc: &Incidence, features: &Tensor) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        if self.config.aggregation != Aggregation::Attention {
            return Err(Error::NotAnAttentionModel);
        }
        Ok(self.run(inc, features, &vec![1.0; inc.num_links()])?.2)
    }

    pub fn save(&self, dir: impl AsRef<Path>, meta: &CheckpointMeta) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut bytes = Vec::new();
        let mut entries = Vec::new();
        let mut offset = 0;
        for ((name, rows, cols), p) in self.config.param_shapes().into_iter().zip(&self.params) {
            entries.push(ParamEntry { name, rows, cols, offset });
            offset += rows * cols;
            for x in p.data() {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        let manifest = Manifest { format: CHECKPOINT_FORMAT.into(), config: self.config, meta: meta.clone(), params: entries };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        std::fs::write(dir.join("weights.bin"), bytes)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<(Self, CheckpointMeta)> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format {}", manifest.format)));
        }
        let bytes = std::fs::read(dir.join("weights.bin"))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Checkpoint("weights file is not a whole number of f64 values".into()));
        }
        let flat: Vec<f64> =
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        let mut params = Vec::new();
        for entry in &manifest.params {
            let end = entry.offset + entry.rows * entry.cols;
            if end > flat.len() {
                return Err(Error::Checkpoint(format!("{} runs past the end of the weights", entry.name)));
            }
            params.push(Tensor::new(entry.rows, entry.cols, flat[entry.offset..end].to_vec())?);
        }
        Ok((Self::from_params(manifest.config, params)?, manifest.meta))
    }
}

const CHECKPOINT_FORMAT: &str = "hyperexplain-checkpoint-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    config: ModelConfig,
    meta: CheckpointMeta,
    params: Vec<ParamEntry>,
}

/// Provenance stored next to the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub train: Option<TrainConfig>,
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Initialization seed used by [`fit`].
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Train and evaluate with every link masked out (features-only control).
    pub structure_blind: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, epochs: 500, seed: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8, structure_blind: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_acc: f64,
    pub val_acc: f64,
    pub final_loss: f64,
}

fn split_labels(g: &Hypergraph, tag: Split) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels = g.labels().ok_or(Error::MissingLabels)?;
    if g.split().is_none() {
        return Err(Error::MissingLabels);
    }
    let nodes = g.nodes_in(tag);
    let ys = nodes.iter().map(|&v| labels[v]).collect();
    Ok((nodes, ys))
}

fn accuracy(probs: &Tensor, nodes: &[usize], labels: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes.iter().zip(labels).filter(|(&v, &y)| argmax(probs.row_slice(v)) == y).count();
    hits as f64 / nodes.len() as f64
}

/// Full-batch training of mean cross-entropy over the train split with Adam.
pub fn train(mut model: HyperGnn, g: &Hypergraph, cfg: &TrainConfig) -> Result<(HyperGnn, TrainReport)> {
    let (train_nodes, train_y) = split_labels(g, Split::Train)?;
    let (val_nodes, val_y) = split_labels(g, Split::Val)?;
    if train_nodes.is_empty() {
        return Err(Error::MissingLabels);
    }
    if g.num_classes() > model.config.num_classes {
        return Err(Error::ShapeMismatch(format!(
            "{} classes in the data, model has {}",
            g.num_classes(),
            model.config.num_classes
        )));
    }
    let inc = g.incidence();
    model.check_inputs(inc, g.features(), g.num_links())?;
    let mask = vec![if cfg.structure_blind { 0.0 } else { 1.0 }; g.num_links()];
    let mut opt = Adam::new(AdamConfig { learning_rate: cfg.learning_rate, beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.eps });
    let mut final_loss = f64::NAN;
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let params: Vec<Var> = model.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let x = tape.constant(g.features().clone());
        let m = tape.constant(Tensor::column(mask.clone()));
        let rec = model.record(&mut tape, &params, inc, x, m)?;
        let loss = tape.softmax_cross_entropy(rec.logits, &train_nodes, &train_y)?;
        final_loss = tape.value(loss).item();
        let grads = tape.backward(loss)?;
        let g_params: Vec<Tensor> =
            params.iter().zip(&model.params).map(|(&v, p)| grads.get_or_zeros(v, p.shape())).collect();
        opt.step(&mut model.params, &g_params);
    }
    let probs = model.forward(inc, g.features(), &mask)?;
    let report = TrainReport {
        train_acc: accuracy(&probs, &train_nodes, &train_y),
        val_acc: accuracy(&probs, &val_nodes, &val_y),
        final_loss,
    };
    Ok((model, report))
}

/// Initializes a model for `g` from `cfg.seed` and trains it.
pub fn fit(g: &Hypergraph, arch: ModelConfig, cfg: &TrainConfig) -> Result<(HyperGnn, TrainReport)> {
    train(HyperGnn::init(arch, cfg.seed)?, g, cfg)
}

/// Accuracy of `model` on the given split with the all-ones (or all-zeros) mask.
pub fn split_accuracy(model: &HyperGnn, g: &Hypergraph, tag: Split, structure_blind: bool) -> Result<f64> {
    let (nodes, ys) = split_labels(g, tag)?;
    let mask = vec![if structure_blind { 0.0 } else { 1.0 }; g.num_links()];
    let probs = model.forward(g.incidence(), g.features(), &mask)?;
    Ok(accuracy(&probs, &nodes, &ys))
}
