//! Global explanations from clusters ("concepts") of final-layer node
//! embeddings. Each concept is summarized by the local explanation of its most
//! central member and attributed to its majority class.

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{explain_instance, ExplainConfig, ExplanationRecord};
use crate::hypergraph::{Hypergraph, Split};
use crate::model::HyperGnn;
use crate::rng;
use crate::tensor::Tensor;

const MAX_ITERS: usize = 100;
const TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptModel {
    pub k: usize,
    pub centroids: Tensor,
    pub assignment: Vec<usize>,
    /// Most frequent label among members (ties to the lowest class); `None` for empty concepts.
    pub majority_class: Vec<Option<usize>>,
    /// k-means objective after initialization and after every Lloyd iteration.
    pub inertia: Vec<f64>,
}

impl ConceptModel {
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&v| self.assignment[v] == c).collect()
    }

    /// Concepts whose majority class is `class`.
    pub fn concepts_of(&self, class: usize) -> Vec<usize> {
        (0..self.k).filter(|&c| self.majority_class[c] == Some(class)).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &Tensor) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(row, centroids.row_slice(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn majority(labels: impl Iterator<Item = usize>) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for y in labels {
        *counts.entry(y).or_default() += 1;
    }
    // BTreeMap iterates in class order, so the first maximum is the lowest class
    counts.into_iter().fold(None, |best: Option<(usize, usize)>, (y, n)| match best {
        Some((_, m)) if m >= n => best,
        _ => Some((y, n)),
    })
    .map(|(y, _)| y)
}

/// Rows scaled to unit Euclidean norm; zero rows stay zero. Sum aggregation
/// makes embedding norms grow with neighbourhood size, and clustering the
/// directions keeps that scale from dominating the concepts.
pub fn unit_rows(z: &Tensor) -> Tensor {
    let mut out = z.clone();
    let d = z.cols();
    for r in 0..z.rows() {
        let norm = z.row_slice(r).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut out.data_mut()[r * d..(r + 1) * d] {
                *x /= norm;
            }
        }
    }
    out
}

/// k-means++ seeding followed by Lloyd iterations until every centroid moves by
/// less than `1e-6` or 100 iterations have run. `labels` give the majority class
/// of each concept.
pub fn extract_concepts(z: &Tensor, k: usize, seed: u64, labels: &[usize]) -> Result<ConceptModel> {
    let n = z.rows();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch(labels.len(), n));
    }
    let mut r = rng::seeded(seed);
    let mut chosen = vec![r.gen_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|v| sq_dist(z.row_slice(v), z.row_slice(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = r.gen::<f64>() * total;
            let mut pick = n - 1;
            for (v, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = v;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // all remaining points coincide with a center
            (0..n).find(|v| !chosen.contains(v)).expect("k <= n")
        };
        chosen.push(next);
        for (v, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(z.row_slice(v), z.row_slice(next)));
        }
    }
    let mut centroids = z.select_rows(&chosen);
    let mut assignment: Vec<usize> = (0..n).map(|v| nearest(z.row_slice(v), &centroids).0).collect();
    let objective = |a: &[usize], c: &Tensor| (0..n).map(|v| sq_dist(z.row_slice(v), c.row_slice(a[v]))).sum::<f64>();
    let mut inertia = vec![objective(&assignment, &centroids)];
    for _ in 0..MAX_ITERS {
        let d = z.cols();
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for v in 0..n {
            let c = assignment[v];
            counts[c] += 1;
            for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(z.row_slice(v)) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mean: Vec<f64> = sums[c * d..(c + 1) * d].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&mean, centroids.row_slice(c)).sqrt());
            for (j, x) in mean.into_iter().enumerate() {
                centroids.set(c, j, x);
            }
        }
        assignment = (0..n).map(|v| nearest(z.row_slice(v), &centroids).0).collect();
        inertia.push(objective(&assignment, &centroids));
        if shift < TOLERANCE {
            break;
        }
    }
    let majority_class =
        (0..k).map(|c| majority((0..n).filter(|&v| assignment[v] == c).map(|v| labels[v]))).collect();
    Ok(ConceptModel { k, centroids, assignment, majority_class, inertia })
}

/// Member closest to the mean of the concept's members; ties to the lowest node id.
pub fn concept_representative(cm: &ConceptModel, z: &Tensor, c: usize) -> Result<usize> {
    let members = cm.members(c);
    if members.is_empty() {
        return Err(Error::EmptyConcept(c));
    }
    let d = z.cols();
    let mut mean = vec![0.0; d];
    for &v in &members {
        for (m, x) in mean.iter_mut().zip(z.row_slice(v)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= members.len() as f64;
    }
    let mut best = (members[0], f64::INFINITY);
    for &v in &members {
        let dist = sq_dist(z.row_slice(v), &mean);
        if dist < best.1 {
            best = (v, dist);
        }
    }
    Ok(best.0)
}

/// One concept's global explanation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptExplanation {
    pub concept: usize,
    pub class: usize,
    pub num_members: usize,
    pub representative: usize,
    pub explanation: ExplanationRecord,
}

/// Explains every nonempty concept's representative and groups the results by
/// the concept's majority class. Every class of `g` has an entry.
pub fn class_explanations(
    cm: &ConceptModel,
    model: &HyperGnn,
    g: &Hypergraph,
    z: &Tensor,
    cfg: &ExplainConfig,
) -> Result<BTreeMap<usize, Vec<ConceptExplanation>>> {
    let concepts: Vec<(usize, usize)> =
        (0..cm.k).filter_map(|c| cm.majority_class[c].map(|y| (c, y))).collect();
    let explained: Vec<ConceptExplanation> = concepts
        .par_iter()
        .map(|&(c, class)| {
            let representative = concept_representative(cm, z, c)?;
            Ok(ConceptExplanation {
                concept: c,
                class,
                num_members: cm.members(c).len(),
                representative,
                explanation: explain_instance(model, g, representative, cfg)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut out: BTreeMap<usize, Vec<ConceptExplanation>> = (0..g.num_classes()).map(|y| (y, Vec::new())).collect();
    for e in explained {
        out.entry(e.class).or_default().push(e);
    }
    Ok(out)
}

/// Accuracy on val nodes of predicting a node's label by the majority train label
/// of its concept. Concepts without train members predict the overall train majority.
pub fn concept_completeness(cm: &ConceptModel, labels: Option<&[usize]>, split: Option<&[Split]>) -> Result<f64> {
    let (labels, split) = match (labels, split) {
        (Some(l), Some(s)) => (l, s),
        _ => return Err(Error::MissingLabels),
    };
    let n = cm.assignment.len();
    if labels.len() != n || split.len() != n {
        return Err(Error::LengthMismatch(labels.len(), n));
    }
    let train: Vec<usize> = (0..n).filter(|&v| split[v] == Split::Train).collect();
    let fallback = majority(train.iter().map(|&v| labels[v])).ok_or(Error::MissingLabels)?;
    let per_concept: Vec<usize> = (0..cm.k)
        .map(|c| majority(train.iter().filter(|&&v| cm.assignment[v] == c).map(|&v| labels[v])).unwrap_or(fallback))
        .collect();
    let val: Vec<usize> = (0..n).filter(|&v| split[v] == Split::Val).collect();
    if val.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = val.iter().filter(|&&v| per_concept[cm.assignment[v]] == labels[v]).count();
    Ok(hits as f64 / val.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_concept_is_the_mean() {
        let z = points(&[&[0.0, 0.0], &[2.0, 0.0], &[1.0, 3.0]]);
        let cm = extract_concepts(&z, 1, 0, &[0, 1, 1]).unwrap();
        assert_eq!(cm.assignment, vec![0, 0, 0]);
        assert!((cm.centroids.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((cm.centroids.get(0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(cm.majority_class, vec![Some(1)]);
    }

    #[test]
    fn k_bounds() {
        let z = points(&[&[0.0], &[1.0]]);
        assert!(matches!(extract_concepts(&z, 3, 0, &[0, 0]), Err(Error::KTooLarge { k: 3, n: 2 })));
        assert!(matches!(extract_concepts(&z, 0, 0, &[0, 0]), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn representative_uses_member_mean() {
        let z = points(&[&[0.0], &[1.0], &[5.0]]);
        let cm = ConceptModel {
            k: 1,
            centroids: points(&[&[0.0]]),
            assignment: vec![0, 0, 0],
            majority_class: vec![Some(0)],
            inertia: vec![],
        };
        assert_eq!(concept_representative(&cm, &z, 0).unwrap(), 1);
        let z = points(&[&[0.0], &[2.0]]);
        let cm = ConceptModel { assignment: vec![0, 0], ..cm };
        assert_eq!(concept_representative(&cm, &z, 0).unwrap(), 0);
        let cm = ConceptModel { k: 2, majority_class: vec![Some(0), None], ..cm };
        assert!(matches!(concept_representative(&cm, &z, 1), Err(Error::EmptyConcept(1))));
    }

    #[test]
    fn unit_rows_normalizes() {
        let z = unit_rows(&points(&[&[3.0, 4.0], &[0.0, 0.0]]));
        assert_eq!(z.data(), &[0.6, 0.8, 0.0, 0.0]);
    }

    #[test]
    fn majority_ties_to_lowest_class() {
        assert_eq!(majority([2, 1, 2, 1].into_iter()), Some(1));
        assert_eq!(majority([3, 3, 1].into_iter()), Some(3));
        assert_eq!(majority(std::iter::empty()), None);
    }

    #[test]
    fn completeness_limits() {
        let labels = [0, 1, 1, 0, 1];
        let split = [Split::Train, Split::Train, Split::Train, Split::Val, Split::Val];
        let cm = ConceptModel {
            k: 1,
            centroids: Tensor::zeros(1, 1),
            assignment: vec![0; 5],
            majority_class: vec![Some(1)],
            inertia: vec![],
        };
        // the train majority is class 1, which matches one of the two val nodes
        assert_eq!(concept_completeness(&cm, Some(&labels), Some(&split)).unwrap(), 0.5);
        assert!(matches!(concept_completeness(&cm, None, Some(&split)), Err(Error::MissingLabels)));
    }
}
