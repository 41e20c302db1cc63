//! Top-n link attribution baselines. Each scores the links of the receptive
//! field, keeps the `n` best and reduces the result to the component around the
//! explained node, like the main explainer's post-processing.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::explain::{explain_instance, ExplainConfig, ExplanationRecord, Instance};
use crate::hypergraph::{computational_subhypergraph, Hypergraph, Subhypergraph};
use crate::model::HyperGnn;
use crate::rng::{self, Rng};
use crate::tensor::{argmax, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Shypx,
    Random,
    Gradient,
    Attention,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Shypx, Method::Random, Method::Gradient, Method::Attention];

    pub fn name(self) -> &'static str {
        match self {
            Method::Shypx => "shypx",
            Method::Random => "random",
            Method::Gradient => "gradient",
            Method::Attention => "attention",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shypx" => Ok(Self::Shypx),
            "random" => Ok(Self::Random),
            "gradient" => Ok(Self::Gradient),
            "attention" => Ok(Self::Attention),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub n: usize,
    pub seed: u64,
    pub method: Method,
}

/// Indices of the `n` largest scores, highest first; equal scores keep index
/// order. With `nonzero`, zero scores are never selected.
pub fn top_n(scores: &[f64], n: usize, nonzero: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| !nonzero || scores[i] != 0.0).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(n);
    idx
}

fn select<'g>(comp: &Subhypergraph<'g>, picked: &[usize]) -> Result<Subhypergraph<'g>> {
    let links = picked.iter().map(|&i| comp.links()[i]).collect();
    let focus = comp.focus().ok_or(Error::InvalidConfig("receptive field without focus".into()))?;
    Ok(Subhypergraph::new(comp.parent(), links, Some(focus))?.connected_component(focus))
}

/// Uniform random scores over the receptive field.
pub fn random_baseline<'g>(comp: &Subhypergraph<'g>, n: usize, rng: &mut Rng) -> Result<Subhypergraph<'g>> {
    let scores: Vec<f64> = (0..comp.size()).map(|_| rng.gen::<f64>()).collect();
    select(comp, &top_n(&scores, n, false))
}

/// `|d logit_c / d m_l|` at the all-ones mask over the receptive field of `v`,
/// where `c` is the predicted class; one score per link of the receptive field.
pub fn gradient_scores(model: &HyperGnn, g: &Hypergraph, v: usize) -> Result<Vec<f64>> {
    let inst = Instance::new(model, g, v)?;
    let n = inst.num_links();
    let class = argmax(&inst.p_comp);
    let focus_idx = [inst.focus];
    let mut onehot = Tensor::zeros(model.config().num_classes, 1);
    onehot.set(class, 0, 1.0);
    let mut tape = Tape::new();
    let params: Vec<_> = model.params().iter().map(|p| tape.constant(p.clone())).collect();
    let x = tape.constant(inst.view.features.clone());
    let mask = tape.leaf(Tensor::column(vec![1.0; n]));
    let rec = model.record(&mut tape, &params, &inst.view.incidence, x, mask)?;
    let row = tape.gather(rec.logits, &focus_idx)?;
    let pick = tape.constant(onehot);
    let logit = tape.matmul(row, pick)?;
    let grads = tape.backward(logit)?;
    Ok(grads.get_or_zeros(mask, (n, 1)).data().iter().map(|x| x.abs()).collect())
}

pub fn gradient_baseline<'g>(model: &HyperGnn, g: &'g Hypergraph, v: usize, n: usize) -> Result<Subhypergraph<'g>> {
    let comp = computational_subhypergraph(g, v, model.num_layers())?;
    let scores = gradient_scores(model, g, v)?;
    select(&comp, &top_n(&scores, n, true))
}

/// Mean attention per link of the receptive field of `v`, computed on the
/// receptive field alone.
pub fn attention_scores(model: &HyperGnn, g: &Hypergraph, v: usize) -> Result<Vec<f64>> {
    let comp = computational_subhypergraph(g, v, model.num_layers())?;
    let view = comp.compact();
    model.attention_weights(&view.incidence, &view.features)
}

pub fn attention_baseline<'g>(model: &HyperGnn, g: &'g Hypergraph, v: usize, n: usize) -> Result<Subhypergraph<'g>> {
    let comp = computational_subhypergraph(g, v, model.num_layers())?;
    let scores = attention_scores(model, g, v)?;
    select(&comp, &top_n(&scores, n, true))
}

/// Explains `v` with any method. `n` is the baseline budget; `cfg` configures the
/// main explainer, and its seed also drives the random baseline.
pub fn explain_with(
    method: Method,
    model: &HyperGnn,
    g: &Hypergraph,
    v: usize,
    n: usize,
    cfg: &ExplainConfig,
) -> Result<ExplanationRecord> {
    let comp_size = || -> Result<usize> { Ok(computational_subhypergraph(g, v, model.num_layers())?.size()) };
    let sub = match method {
        Method::Shypx => return explain_instance(model, g, v, cfg),
        Method::Random => {
            let comp = computational_subhypergraph(g, v, model.num_layers())?;
            random_baseline(&comp, n, &mut rng::seeded(rng::derive(cfg.seed, v as u64)))?
        }
        Method::Gradient => gradient_baseline(model, g, v, n)?,
        Method::Attention => attention_baseline(model, g, v, n)?,
    };
    Ok(ExplanationRecord::new(g, v, method.name(), &sub, comp_size()?))
}

/// [`explain_with`] over many nodes in parallel; results follow the input order.
pub fn explain_all(
    method: Method,
    model: &HyperGnn,
    g: &Hypergraph,
    nodes: &[usize],
    n: usize,
    cfg: &ExplainConfig,
) -> Result<Vec<ExplanationRecord>> {
    nodes.par_iter().map(|&v| explain_with(method, model, g, v, n, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Aggregation, ModelConfig};

    #[test]
    fn top_n_order_and_ties() {
        assert_eq!(top_n(&[0.1, 0.5, 0.5, 0.0], 2, false), vec![1, 2]);
        assert_eq!(top_n(&[0.0, 0.0, 0.3], 5, true), vec![2]);
        assert_eq!(top_n(&[0.0, 0.0], 1, false), vec![0]);
        assert!(top_n(&[1.0], 0, false).is_empty());
    }

    #[test]
    fn gradient_matches_hand_chain_rule() {
        // one layer with identity-like weights on hyperedge {a, b}:
        // logit_0(a) = x_a + m_a (m_a x_a + m_b x_b), so d/dm_b = x_b and d/dm_a = 2 x_a + x_b
        let cfg = ModelConfig { feature_dim: 1, hidden_dim: 1, num_layers: 1, num_classes: 2, aggregation: Aggregation::Sum };
        let params = cfg
            .param_shapes()
            .into_iter()
            .map(|(name, r, c)| match name.as_str() {
                "classifier_w" => Tensor::row(vec![1.0, -1.0]),
                n if n.contains("_b") => Tensor::zeros(r, c),
                _ => Tensor::filled(r, c, 1.0),
            })
            .collect();
        let model = HyperGnn::from_params(cfg, params).unwrap();
        let g = Hypergraph::from_hyperedges(2, &[vec![0, 1]], Tensor::column(vec![1.0, 2.0]), None, None).unwrap();
        let scores = gradient_scores(&model, &g, 0).unwrap();
        assert_eq!(scores, vec![4.0, 2.0]);
        let sub = gradient_baseline(&model, &g, 0, 1).unwrap();
        // the single top link touches a and the hyperedge, so it survives post-processing
        assert_eq!(sub.links(), &[0]);
    }

    #[test]
    fn random_baseline_budget_and_determinism() {
        let g = crate::hypergraph::tests::two_edge_graph();
        let comp = computational_subhypergraph(&g, 0, 2).unwrap();
        assert!(random_baseline(&comp, 0, &mut rng::seeded(1)).unwrap().is_trivial());
        let a = random_baseline(&comp, 3, &mut rng::seeded(5)).unwrap();
        let b = random_baseline(&comp, 3, &mut rng::seeded(5)).unwrap();
        assert_eq!(a.links(), b.links());
        assert!(a.size() <= 3);
    }

    #[test]
    fn attention_requires_attention_model() {
        let g = crate::hypergraph::tests::two_edge_graph();
        let model = HyperGnn::init(ModelConfig::new(g.feature_dim(), 2), 0).unwrap();
        assert!(matches!(attention_baseline(&model, &g, 0, 3), Err(Error::NotAnAttentionModel)));
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("hyperex".parse::<Method>().is_err());
    }
}
