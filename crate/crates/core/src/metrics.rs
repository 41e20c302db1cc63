//! Generalized fidelity: how well the prediction on an explanation (Fid-) or on
//! its complement within the receptive field (Fid+) matches the prediction on
//! the whole receptive field, under four similarity functions. Lower is better
//! for every Fid- column.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::LOG_EPS;
use crate::error::{Error, Result};
use crate::explain::{ExplanationRecord, Instance};
use crate::hypergraph::Hypergraph;
use crate::model::HyperGnn;
use crate::tensor::argmax;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Acc,
    Kl,
    Tv,
    Xent,
}

impl Similarity {
    pub const ALL: [Similarity; 4] = [Similarity::Acc, Similarity::Kl, Similarity::Tv, Similarity::Xent];

    pub fn name(self) -> &'static str {
        match self {
            Similarity::Acc => "acc",
            Similarity::Kl => "kl",
            Similarity::Tv => "tv",
            Similarity::Xent => "xent",
        }
    }
}

fn check(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    for d in [p, q] {
        if d.is_empty() || d.iter().any(|&x| !(x >= -1e-12)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::NotADistribution(format!("{d:?}")));
        }
    }
    Ok(())
}

/// `s(p, q)` where `p` is the prediction under test and `q` the reference.
///
/// `Kl` is `sum p ln(p / q)`, `Tv` is half the L1 distance, `Xent` is the
/// positive cross-entropy `-sum p ln q`, and `Acc` is 1 when the argmaxes
/// differ and 0 otherwise.
pub fn similarity(kind: Similarity, p: &[f64], q: &[f64]) -> Result<f64> {
    check(p, q)?;
    let ln = |x: f64| x.max(LOG_EPS).ln();
    Ok(match kind {
        Similarity::Kl => p.iter().zip(q).map(|(&a, &b)| a * (ln(a) - ln(b))).sum(),
        Similarity::Tv => 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>(),
        Similarity::Xent => -p.iter().zip(q).map(|(&a, &b)| a * ln(b)).sum::<f64>(),
        Similarity::Acc => f64::from(u8::from(argmax(p) != argmax(q))),
    })
}

/// One value per similarity function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub acc: f64,
    pub kl: f64,
    pub tv: f64,
    pub xent: f64,
}

impl Scores {
    fn compute(p: &[f64], q: &[f64]) -> Result<Self> {
        Ok(Self {
            acc: similarity(Similarity::Acc, p, q)?,
            kl: similarity(Similarity::Kl, p, q)?,
            tv: similarity(Similarity::Tv, p, q)?,
            xent: similarity(Similarity::Xent, p, q)?,
        })
    }

    pub fn get(&self, kind: Similarity) -> f64 {
        match kind {
            Similarity::Acc => self.acc,
            Similarity::Kl => self.kl,
            Similarity::Tv => self.tv,
            Similarity::Xent => self.xent,
        }
    }

    fn mean<'a>(items: impl Iterator<Item = &'a Scores>) -> Self {
        let mut out = Scores::default();
        let mut n = 0.0;
        for s in items {
            out.acc += s.acc;
            out.kl += s.kl;
            out.tv += s.tv;
            out.xent += s.xent;
            n += 1.0;
        }
        if n > 0.0 {
            out.acc /= n;
            out.kl /= n;
            out.tv /= n;
            out.xent /= n;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub node: usize,
    pub size: usize,
    pub comp_size: usize,
    pub density: f64,
    pub fid_minus: Scores,
    pub fid_plus: Scores,
    pub p_comp: Vec<f64>,
    pub p_expl: Vec<f64>,
    pub p_complement: Vec<f64>,
}

/// Scores one explanation against its node's receptive-field prediction.
pub fn instance_metrics(model: &HyperGnn, g: &Hypergraph, record: &ExplanationRecord) -> Result<InstanceMetrics> {
    let inst = Instance::new(model, g, record.node)?;
    let keep = inst.view.mask_for(&record.links);
    if keep.iter().sum::<f64>() as usize != record.links.len() {
        return Err(Error::NotASubset);
    }
    let complement: Vec<f64> = keep.iter().map(|&m| 1.0 - m).collect();
    let p_expl = inst.predict(&keep)?;
    let p_complement = inst.predict(&complement)?;
    let comp_size = inst.num_links();
    Ok(InstanceMetrics {
        node: record.node,
        size: record.links.len(),
        comp_size,
        density: if comp_size == 0 { 0.0 } else { record.links.len() as f64 / comp_size as f64 },
        fid_minus: Scores::compute(&p_expl, &inst.p_comp)?,
        fid_plus: Scores::compute(&p_complement, &inst.p_comp)?,
        p_comp: inst.p_comp,
        p_expl,
        p_complement,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fid_minus: Scores,
    pub fid_plus: Scores,
    pub mean_size: f64,
    pub mean_density: f64,
    pub num_instances: usize,
}

impl FidelityReport {
    pub fn from_instances(items: &[InstanceMetrics]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = items.len() as f64;
        Ok(Self {
            fid_minus: Scores::mean(items.iter().map(|m| &m.fid_minus)),
            fid_plus: Scores::mean(items.iter().map(|m| &m.fid_plus)),
            mean_size: items.iter().map(|m| m.size as f64).sum::<f64>() / n,
            mean_density: items.iter().map(|m| m.density).sum::<f64>() / n,
            num_instances: items.len(),
        })
    }
}

/// Per-instance metrics (in input order) and their aggregate.
pub fn evaluate_explanations(
    model: &HyperGnn,
    g: &Hypergraph,
    records: &[ExplanationRecord],
) -> Result<(FidelityReport, Vec<InstanceMetrics>)> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let items: Vec<InstanceMetrics> = records.par_iter().map(|r| instance_metrics(model, g, r)).collect::<Result<_>>()?;
    Ok((FidelityReport::from_instances(&items)?, items))
}

/// Mean Fid- under one similarity function.
pub fn fidelity_minus(model: &HyperGnn, g: &Hypergraph, records: &[ExplanationRecord], kind: Similarity) -> Result<f64> {
    Ok(evaluate_explanations(model, g, records)?.0.fid_minus.get(kind))
}

/// Mean Fid+ under one similarity function.
pub fn fidelity_plus(model: &HyperGnn, g: &Hypergraph, records: &[ExplanationRecord], kind: Similarity) -> Result<f64> {
    Ok(evaluate_explanations(model, g, records)?.0.fid_plus.get(kind))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_values() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(similarity(Similarity::Kl, &p, &p).unwrap(), 0.0);
        let tv = similarity(Similarity::Tv, &[0.3, 0.7], &[0.5, 0.5]).unwrap();
        assert!((tv - 0.2).abs() < 1e-12);
        assert_eq!(similarity(Similarity::Acc, &[0.9, 0.1], &[0.4, 0.6]).unwrap(), 1.0);
        assert_eq!(similarity(Similarity::Acc, &[0.5, 0.5], &[0.6, 0.4]).unwrap(), 0.0);
        let h: f64 = -p.iter().map(|x| x * x.ln()).sum::<f64>();
        assert!((similarity(Similarity::Xent, &p, &p).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn similarity_errors() {
        assert!(matches!(similarity(Similarity::Kl, &[1.0], &[0.5, 0.5]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(similarity(Similarity::Tv, &[0.7, 0.7], &[0.5, 0.5]), Err(Error::NotADistribution(_))));
    }

    #[test]
    fn report_means() {
        let mk = |tv: f64, size: usize| InstanceMetrics {
            node: 0,
            size,
            comp_size: 10,
            density: size as f64 / 10.0,
            fid_minus: Scores { tv, ..Scores::default() },
            fid_plus: Scores::default(),
            p_comp: vec![],
            p_expl: vec![],
            p_complement: vec![],
        };
        let r = FidelityReport::from_instances(&[mk(0.2, 2), mk(0.4, 4)]).unwrap();
        assert!((r.fid_minus.tv - 0.3).abs() < 1e-12);
        assert_eq!(r.mean_size, 3.0);
        assert!((r.mean_density - 0.3).abs() < 1e-12);
        assert!(matches!(FidelityReport::from_instances(&[]), Err(Error::EmptyInput)));
    }
}
