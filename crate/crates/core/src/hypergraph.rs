//! Hypergraphs stored as node-hyperedge link lists, and subhypergraphs as
//! subsets of those links.
//!
//! Links are kept in canonical order, sorted by `(hyperedge, node)`, so any
//! serialization is byte-stable. A [`Subhypergraph`] is a set of link indices
//! into its parent plus an optional focus node; nodes and sub-hyperedges are
//! implied by the kept links, so empty hyperedges and isolated nodes cannot be
//! represented. The trivial subhypergraph (no links, focus only) is a valid
//! value and stands for "just the node's own features".

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// A single `(node, hyperedge)` incidence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub node: usize,
    pub hyperedge: usize,
}

/// Bare incidence structure consumed by message passing.
#[derive(Clone, Debug, PartialEq)]
pub struct Incidence {
    pub num_nodes: usize,
    pub num_hyperedges: usize,
    pub link_node: Vec<usize>,
    pub link_edge: Vec<usize>,
}

impl Incidence {
    pub fn num_links(&self) -> usize {
        self.link_node.len()
    }
}

#[derive(Clone, Debug)]
pub struct Hypergraph {
    incidence: Incidence,
    features: Tensor,
    labels: Option<Vec<usize>>,
    split: Option<Vec<Split>>,
    // link index ranges per hyperedge (links are sorted by hyperedge)
    edge_offsets: Vec<usize>,
    node_links: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Builds a hypergraph from arbitrary `(node, hyperedge)` pairs. Hyperedge ids
    /// are compacted to `0..num_hyperedges` preserving their relative order.
    pub fn from_links(
        num_nodes: usize,
        links: &[(usize, usize)],
        features: Tensor,
        labels: Option<Vec<usize>>,
        split: Option<Vec<Split>>,
    ) -> Result<Self> {
        let mut remap = BTreeMap::new();
        for &(_, e) in links {
            remap.entry(e).or_insert(0usize);
        }
        for (i, v) in remap.values_mut().enumerate() {
            *v = i;
        }
        let compact: Vec<(usize, usize)> = links.iter().map(|&(v, e)| (v, remap[&e])).collect();
        Self::build(num_nodes, remap.len(), compact, features, labels, split)
    }

    /// Builds a hypergraph from hyperedge member lists; hyperedge `i` keeps id `i`.
    pub fn from_hyperedges(
        num_nodes: usize,
        hyperedges: &[Vec<usize>],
        features: Tensor,
        labels: Option<Vec<usize>>,
        split: Option<Vec<Split>>,
    ) -> Result<Self> {
        let mut links = Vec::new();
        for (e, members) in hyperedges.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::EmptyHyperedge(e));
            }
            links.extend(members.iter().map(|&v| (v, e)));
        }
        Self::build(num_nodes, hyperedges.len(), links, features, labels, split)
    }

    fn build(
        num_nodes: usize,
        num_hyperedges: usize,
        mut links: Vec<(usize, usize)>,
        features: Tensor,
        labels: Option<Vec<usize>>,
        split: Option<Vec<Split>>,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != num_nodes {
                return Err(Error::LengthMismatch(l.len(), num_nodes));
            }
        }
        if let Some(s) = &split {
            if s.len() != num_nodes {
                return Err(Error::LengthMismatch(s.len(), num_nodes));
            }
        }
        for &(v, _) in &links {
            if v >= num_nodes {
                return Err(Error::DanglingId { node: v, num_nodes });
            }
        }
        links.sort_unstable_by_key(|&(v, e)| (e, v));
        for w in links.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateLink { node: w[0].0, hyperedge: w[0].1 });
            }
        }
        let mut edge_offsets = vec![0usize; num_hyperedges + 1];
        for &(_, e) in &links {
            edge_offsets[e + 1] += 1;
        }
        for e in 0..num_hyperedges {
            if edge_offsets[e + 1] == 0 {
                return Err(Error::EmptyHyperedge(e));
            }
            edge_offsets[e + 1] += edge_offsets[e];
        }
        let mut node_links = vec![Vec::new(); num_nodes];
        for (i, &(v, _)) in links.iter().enumerate() {
            node_links[v].push(i);
        }
        let incidence = Incidence {
            num_nodes,
            num_hyperedges,
            link_node: links.iter().map(|l| l.0).collect(),
            link_edge: links.iter().map(|l| l.1).collect(),
        };
        Ok(Self { incidence, features, labels, split, edge_offsets, node_links })
    }

    pub fn num_nodes(&self) -> usize {
        self.incidence.num_nodes
    }

    pub fn num_hyperedges(&self) -> usize {
        self.incidence.num_hyperedges
    }

    pub fn num_links(&self) -> usize {
        self.incidence.link_node.len()
    }

    pub fn link(&self, i: usize) -> Link {
        Link { node: self.incidence.link_node[i], hyperedge: self.incidence.link_edge[i] }
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        (0..self.num_links()).map(|i| self.link(i))
    }

    pub fn incidence(&self) -> &Incidence {
        &self.incidence
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn split(&self) -> Option<&[Split]> {
        self.split.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.iter().max()).map_or(0, |m| m + 1)
    }

    /// Nodes with the given split tag, in increasing id order.
    pub fn nodes_in(&self, tag: Split) -> Vec<usize> {
        match &self.split {
            Some(s) => (0..self.num_nodes()).filter(|&v| s[v] == tag).collect(),
            None => Vec::new(),
        }
    }

    /// Link indices of hyperedge `e`.
    pub fn edge_links(&self, e: usize) -> std::ops::Range<usize> {
        self.edge_offsets[e]..self.edge_offsets[e + 1]
    }

    /// Members of hyperedge `e` in increasing node order.
    pub fn edge_members(&self, e: usize) -> &[usize] {
        &self.incidence.link_node[self.edge_links(e)]
    }

    /// Link indices incident to node `v`.
    pub fn node_links(&self, v: usize) -> &[usize] {
        &self.node_links[v]
    }

    pub fn hyperedges(&self) -> Vec<Vec<usize>> {
        (0..self.num_hyperedges()).map(|e| self.edge_members(e).to_vec()).collect()
    }

    pub fn to_file(&self) -> HypergraphFile {
        HypergraphFile {
            num_nodes: self.num_nodes(),
            hyperedges: self.hyperedges(),
            features: self.features.to_rows(),
            labels: self.labels.clone(),
            split: self.split.clone(),
        }
    }

    pub fn from_file(file: HypergraphFile) -> Result<Self> {
        let features = if file.features.is_empty() {
            Tensor::zeros(file.num_nodes, 0)
        } else {
            Tensor::from_rows(&file.features)?
        };
        Self::from_hyperedges(file.num_nodes, &file.hyperedges, features, file.labels, file.split)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.num_nodes() {
            return Err(Error::NodeOutOfRange { node: v, num_nodes: self.num_nodes() });
        }
        Ok(())
    }
}

/// On-disk JSON layout of a hypergraph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypergraphFile {
    pub num_nodes: usize,
    pub hyperedges: Vec<Vec<usize>>,
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub split: Option<Vec<Split>>,
}

/// Link count and density of an explanation relative to its computational subhypergraph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub size: usize,
    pub density: f64,
}

/// A subset of a parent hypergraph's links, optionally centred on a focus node.
#[derive(Clone, Debug)]
pub struct Subhypergraph<'g> {
    parent: &'g Hypergraph,
    links: Vec<usize>,
    focus: Option<usize>,
}

impl PartialEq for Subhypergraph<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.parent, other.parent) && self.links == other.links && self.focus == other.focus
    }
}

impl<'g> Subhypergraph<'g> {
    /// Link indices are sorted and deduplicated.
    pub fn new(parent: &'g Hypergraph, mut links: Vec<usize>, focus: Option<usize>) -> Result<Self> {
        links.sort_unstable();
        links.dedup();
        if let Some(&last) = links.last() {
            if last >= parent.num_links() {
                return Err(Error::ShapeMismatch(format!(
                    "link index {last} out of range for {} links",
                    parent.num_links()
                )));
            }
        }
        if let Some(v) = focus {
            parent.check_node(v)?;
        }
        Ok(Self { parent, links, focus })
    }

    pub fn trivial(parent: &'g Hypergraph, focus: usize) -> Self {
        Self { parent, links: Vec::new(), focus: Some(focus) }
    }

    pub fn full(parent: &'g Hypergraph) -> Self {
        Self { parent, links: (0..parent.num_links()).collect(), focus: None }
    }

    pub fn parent(&self) -> &'g Hypergraph {
        self.parent
    }

    /// Sorted parent link indices.
    pub fn links(&self) -> &[usize] {
        &self.links
    }

    pub fn focus(&self) -> Option<usize> {
        self.focus
    }

    pub fn with_focus(mut self, focus: Option<usize>) -> Self {
        self.focus = focus;
        self
    }

    /// `|G|_1`, the number of kept links.
    pub fn size(&self) -> usize {
        self.links.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains_link(&self, i: usize) -> bool {
        self.links.binary_search(&i).is_ok()
    }

    /// Nodes touched by kept links plus the focus node, sorted.
    pub fn nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.links.iter().map(|&i| self.parent.incidence.link_node[i]).collect();
        nodes.extend(self.focus);
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Parent hyperedge ids with at least one kept link, sorted.
    pub fn hyperedges(&self) -> Vec<usize> {
        let mut edges: Vec<usize> = self.links.iter().map(|&i| self.parent.incidence.link_edge[i]).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn kept_pairs(&self) -> Vec<Link> {
        self.links.iter().map(|&i| self.parent.link(i)).collect()
    }

    /// Dense 0/1 indicator over all parent links.
    pub fn indicator(&self) -> Vec<bool> {
        let mut kept = vec![false; self.parent.num_links()];
        for &i in &self.links {
            kept[i] = true;
        }
        kept
    }

    fn same_parent(&self, other: &Subhypergraph<'_>) -> Result<()> {
        if std::ptr::eq(self.parent, other.parent) {
            Ok(())
        } else {
            Err(Error::ParentMismatch)
        }
    }

    pub fn is_subset_of(&self, other: &Subhypergraph<'_>) -> bool {
        std::ptr::eq(self.parent, other.parent) && self.links.iter().all(|&i| other.contains_link(i))
    }

    /// Links of `self` that are not in `expl`; `self` is the reference (computational)
    /// subhypergraph and keeps its focus.
    pub fn complement(&self, expl: &Subhypergraph<'_>) -> Result<Subhypergraph<'g>> {
        self.same_parent(expl)?;
        if !expl.is_subset_of(self) {
            return Err(Error::NotASubset);
        }
        let links = self.links.iter().copied().filter(|&i| !expl.contains_link(i)).collect();
        Ok(Subhypergraph { parent: self.parent, links, focus: self.focus })
    }

    /// Maximal set of kept links whose node-hyperedge incidence graph is connected
    /// and touches `v`. Returns the trivial subhypergraph when no kept link touches `v`.
    pub fn connected_component(&self, v: usize) -> Subhypergraph<'g> {
        let g = self.parent;
        let kept = self.indicator();
        let mut seen_node = HashSet::new();
        let mut seen_edge = HashSet::new();
        let mut taken = Vec::new();
        let mut queue = VecDeque::new();
        seen_node.insert(v);
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            for &li in g.node_links(u) {
                if !kept[li] {
                    continue;
                }
                let e = g.incidence.link_edge[li];
                if !seen_edge.insert(e) {
                    continue;
                }
                for lj in g.edge_links(e) {
                    if !kept[lj] {
                        continue;
                    }
                    taken.push(lj);
                    let w = g.incidence.link_node[lj];
                    if seen_node.insert(w) {
                        queue.push_back(w);
                    }
                }
            }
        }
        taken.sort_unstable();
        Subhypergraph { parent: g, links: taken, focus: Some(v) }
    }

    pub fn size_and_density(&self, comp: &Subhypergraph<'_>) -> Result<SizeReport> {
        self.same_parent(comp)?;
        if !self.is_subset_of(comp) {
            return Err(Error::NotASubset);
        }
        let size = self.size();
        let density = if comp.size() == 0 { 0.0 } else { size as f64 / comp.size() as f64 };
        Ok(SizeReport { size, density })
    }

    /// Re-indexes the kept structure into a standalone incidence over the touched
    /// nodes (plus the focus node), with the matching feature rows.
    pub fn compact(&self) -> CompactView {
        let nodes = self.nodes();
        let mut local_node = vec![usize::MAX; self.parent.num_nodes()];
        for (i, &v) in nodes.iter().enumerate() {
            local_node[v] = i;
        }
        let edges = self.hyperedges();
        let mut edge_local = BTreeMap::new();
        for (i, &e) in edges.iter().enumerate() {
            edge_local.insert(e, i);
        }
        let inc = &self.parent.incidence;
        let incidence = Incidence {
            num_nodes: nodes.len(),
            num_hyperedges: edges.len(),
            link_node: self.links.iter().map(|&i| local_node[inc.link_node[i]]).collect(),
            link_edge: self.links.iter().map(|&i| edge_local[&inc.link_edge[i]]).collect(),
        };
        CompactView {
            features: self.parent.features.select_rows(&nodes),
            focus: self.focus.map(|v| local_node[v]),
            incidence,
            node_map: nodes,
            link_map: self.links.clone(),
        }
    }
}

/// A subhypergraph rebuilt as its own incidence structure; local link `i`
/// corresponds to parent link `link_map[i]`.
#[derive(Clone, Debug)]
pub struct CompactView {
    pub incidence: Incidence,
    pub features: Tensor,
    pub node_map: Vec<usize>,
    pub link_map: Vec<usize>,
    pub focus: Option<usize>,
}

impl CompactView {
    pub fn num_links(&self) -> usize {
        self.link_map.len()
    }

    /// Local link indices of the given parent links; links absent from the view are skipped.
    pub fn local_links(&self, parent_links: &[usize]) -> Vec<usize> {
        parent_links.iter().filter_map(|l| self.link_map.binary_search(l).ok()).collect()
    }

    /// Dense 0/1 mask over local links selecting the given parent links.
    pub fn mask_for(&self, parent_links: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.num_links()];
        for i in self.local_links(parent_links) {
            m[i] = 1.0;
        }
        m
    }
}

/// Receptive field of `v` under `depth` rounds of message passing: each round adds
/// every hyperedge incident to the current node set, with all of its links.
pub fn computational_subhypergraph(g: &Hypergraph, v: usize, depth: usize) -> Result<Subhypergraph<'_>> {
    g.check_node(v)?;
    let mut in_nodes = vec![false; g.num_nodes()];
    let mut in_edges = vec![false; g.num_hyperedges()];
    let mut frontier = vec![v];
    in_nodes[v] = true;
    let mut links = Vec::new();
    for _ in 0..depth {
        let mut next = Vec::new();
        for &u in &frontier {
            for &li in g.node_links(u) {
                let e = g.incidence.link_edge[li];
                if in_edges[e] {
                    continue;
                }
                in_edges[e] = true;
                for lj in g.edge_links(e) {
                    links.push(lj);
                    let w = g.incidence.link_node[lj];
                    if !in_nodes[w] {
                        in_nodes[w] = true;
                        next.push(w);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    links.sort_unstable();
    Ok(Subhypergraph { parent: g, links, focus: Some(v) })
}
