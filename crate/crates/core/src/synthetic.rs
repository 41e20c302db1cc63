//! Synthetic node-classification benchmarks: a random or tree base hypergraph
//! with labeled motifs attached by single degree-2 hyperedges, plus random
//! degree-2 perturbations.
//!
//! Node layout of a generated dataset: for each community in turn, its base
//! nodes followed by its motif copies (one contiguous block per motif). Every
//! random draw comes from one ChaCha8 stream seeded by [`DatasetSpec::seed`].

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, Split};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

const MAX_BASE_ATTEMPTS: usize = 50;
/// Label offset applied to the second community.
pub const COMMUNITY_LABEL_OFFSET: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Random,
    Tree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotifKind {
    House,
    Cycle,
    Grid,
}

impl std::str::FromStr for MotifKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "house" => Ok(Self::House),
            "cycle" => Ok(Self::Cycle),
            "grid" => Ok(Self::Grid),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Ones,
    BimodalNormal,
}

/// Part sizes `n` (future nodes), `m` (future hyperedges) and edge count `k` of
/// the random bipartite graph behind a random base.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

impl Default for BipartiteParams {
    fn default() -> Self {
        Self { n: 600, m: 400, k: 600 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub base_kind: BaseKind,
    pub motif_kind: MotifKind,
    /// Total base nodes over all communities. A tree base needs `2^depth - 1` per community.
    pub target_base_nodes: usize,
    /// Total motifs over all communities.
    pub num_motifs: usize,
    pub num_perturbations: usize,
    pub num_communities: usize,
    pub num_inter_community_edges: usize,
    pub feature_kind: FeatureKind,
    pub feature_dim: usize,
    pub seed: u64,
    #[serde(default)]
    pub bipartite: BipartiteParams,
}

impl DatasetSpec {
    pub fn rand_house() -> Self {
        Self {
            base_kind: BaseKind::Random,
            motif_kind: MotifKind::House,
            target_base_nodes: 312,
            num_motifs: 100,
            num_perturbations: 80,
            num_communities: 1,
            num_inter_community_edges: 0,
            feature_kind: FeatureKind::Ones,
            feature_dim: 10,
            seed: 0,
            bipartite: BipartiteParams::default(),
        }
    }

    pub fn comm_house() -> Self {
        Self {
            target_base_nodes: 648,
            num_motifs: 200,
            num_communities: 2,
            num_inter_community_edges: 80,
            feature_kind: FeatureKind::BimodalNormal,
            ..Self::rand_house()
        }
    }

    pub fn tree_cycle() -> Self {
        Self {
            base_kind: BaseKind::Tree,
            motif_kind: MotifKind::Cycle,
            target_base_nodes: 255,
            num_motifs: 80,
            ..Self::rand_house()
        }
    }

    pub fn tree_grid() -> Self {
        Self { motif_kind: MotifKind::Grid, ..Self::tree_cycle() }
    }

    /// Preset by name: `rand_house`, `comm_house`, `tree_cycle` or `tree_grid`
    /// (case-insensitive, an `h-` prefix and dashes are accepted).
    pub fn preset(name: &str) -> Result<Self> {
        let key = name.to_ascii_lowercase().replace('-', "_");
        match key.strip_prefix("h_").unwrap_or(&key) {
            "randhouse" | "rand_house" => Ok(Self::rand_house()),
            "commhouse" | "comm_house" => Ok(Self::comm_house()),
            "treecycle" | "tree_cycle" => Ok(Self::tree_cycle()),
            "treegrid" | "tree_grid" => Ok(Self::tree_grid()),
            _ => Err(Error::UnknownKind(name.to_string())),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.num_communities) {
            return Err(Error::InvalidSpec(format!("{} communities", self.num_communities)));
        }
        if self.num_communities == 2 && self.feature_kind != FeatureKind::BimodalNormal {
            return Err(Error::InvalidSpec("two communities need bimodal normal features".into()));
        }
        if self.num_communities == 1 && self.num_inter_community_edges > 0 {
            return Err(Error::InvalidSpec("inter-community edges without a second community".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidSpec("feature_dim must be positive".into()));
        }
        if self.target_base_nodes < self.num_communities {
            return Err(Error::InvalidSpec("every community needs a base node".into()));
        }
        Ok(())
    }
}

/// A small labeled hypergraph with local node ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Motif {
    pub num_nodes: usize,
    pub hyperedges: Vec<Vec<usize>>,
    pub anchor: usize,
    pub labels: Vec<usize>,
}

pub fn build_motif(kind: MotifKind) -> Motif {
    match kind {
        // t, m1, m2, b1, b2
        MotifKind::House => Motif {
            num_nodes: 5,
            hyperedges: vec![vec![0, 1, 2], vec![1, 2, 3, 4]],
            anchor: 1,
            labels: vec![1, 2, 2, 3, 3],
        },
        MotifKind::Cycle => Motif {
            num_nodes: 6,
            hyperedges: vec![vec![0, 1, 2], vec![2, 3, 4], vec![4, 5, 0]],
            anchor: 0,
            labels: vec![1; 6],
        },
        MotifKind::Grid => {
            let rows = (0..3).map(|r| (0..3).map(|c| 3 * r + c).collect());
            let cols = (0..3).map(|c| (0..3).map(|r| 3 * r + c).collect());
            Motif { num_nodes: 9, hyperedges: rows.chain(cols).collect(), anchor: 0, labels: vec![1; 9] }
        }
    }
}

/// Node count and hyperedge member lists, before features and labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Structure {
    pub num_nodes: usize,
    pub hyperedges: Vec<Vec<usize>>,
}

impl Structure {
    /// Hypergraph with all-ones features of the given dimension and no labels.
    pub fn into_hypergraph(self, feature_dim: usize) -> Result<Hypergraph> {
        Hypergraph::from_hyperedges(self.num_nodes, &self.hyperedges, Tensor::filled(self.num_nodes, feature_dim, 1.0), None, None)
    }
}

/// Complete binary tree with `depth` levels; one hyperedge per internal node.
pub fn tree_base(depth: usize) -> Result<Structure> {
    if depth == 0 || depth >= usize::BITS as usize {
        return Err(Error::InvalidSpec(format!("tree depth {depth}")));
    }
    let num_nodes = (1usize << depth) - 1;
    let internal = (1usize << (depth - 1)) - 1;
    let hyperedges = (0..internal).map(|p| vec![p, 2 * p + 1, 2 * p + 2]).collect();
    Ok(Structure { num_nodes, hyperedges })
}

fn tree_depth_for(nodes: usize) -> Result<usize> {
    let depth = (nodes + 1).trailing_zeros() as usize;
    if nodes == 0 || (1usize << depth) - 1 != nodes {
        return Err(Error::InvalidSpec(format!("{nodes} is not the size of a complete binary tree")));
    }
    Ok(depth)
}

/// Random base hypergraph with exactly `target_nodes` nodes, by inverse star
/// expansion of the largest component of a random bipartite graph.
pub fn random_base(target_nodes: usize, params: BipartiteParams, rng: &mut Rng) -> Result<Structure> {
    if target_nodes == 0 {
        return Err(Error::InvalidSpec("target_nodes must be positive".into()));
    }
    let BipartiteParams { n, m, mut k } = params;
    for _ in 0..MAX_BASE_ATTEMPTS {
        if let Some(s) = try_random_base(target_nodes, n, m, k, rng) {
            return Ok(s);
        }
        k += k / 10;
    }
    Err(Error::GenerationFailed(format!(
        "no component with {target_nodes} nodes after {MAX_BASE_ATTEMPTS} attempts (n={n}, m={m}, k={})",
        params.k
    )))
}

/// Seeded wrapper around [`random_base`] returning a featureless hypergraph.
pub fn generate_random_base(target_nodes: usize, params: BipartiteParams, seed: u64) -> Result<Hypergraph> {
    random_base(target_nodes, params, &mut rng::seeded(seed))?.into_hypergraph(1)
}

fn try_random_base(target: usize, n: usize, m: usize, k: usize, rng: &mut Rng) -> Option<Structure> {
    if n == 0 || m == 0 {
        return None;
    }
    let k = k.min(n * m);
    let mut pairs = BTreeSet::new();
    while pairs.len() < k {
        pairs.insert((rng.gen_range(0..n), rng.gen_range(0..m)));
    }
    // vertices 0..n are part A, n..n+m part B
    let mut adj = vec![Vec::new(); n + m];
    for &(a, b) in &pairs {
        adj[a].push(n + b);
        adj[n + b].push(a);
    }
    let mut comp = vec![usize::MAX; n + m];
    let mut best = (0, 0);
    let mut count = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        let mut stack = vec![s];
        let mut a_count = 0;
        while let Some(u) = stack.pop() {
            if u < n {
                a_count += 1;
            }
            for &w in &adj[u] {
                if comp[w] == usize::MAX {
                    comp[w] = count;
                    stack.push(w);
                }
            }
        }
        if a_count > best.0 {
            best = (a_count, s);
        }
        count += 1;
    }
    if best.0 < target {
        return None;
    }
    // part-A vertices of the largest component in BFS order from its lowest vertex
    let root = best.1;
    let mut seen = vec![false; n + m];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    let mut order = Vec::new();
    while let Some(u) = queue.pop_front() {
        if u < n {
            order.push(u);
            if order.len() == target {
                break;
            }
        }
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    let mut local = vec![usize::MAX; n];
    for (i, &a) in order.iter().enumerate() {
        local[a] = i;
    }
    let hyperedges = (0..m)
        .map(|b| {
            let mut members: Vec<usize> =
                adj[n + b].iter().filter(|&&a| local[a] != usize::MAX).map(|&a| local[a]).collect();
            members.sort_unstable();
            members
        })
        .filter(|e| !e.is_empty())
        .collect();
    Some(Structure { num_nodes: target, hyperedges })
}

fn pair_key(a: usize, b: usize) -> Vec<usize> {
    vec![a.min(b), a.max(b)]
}

/// Draws `count` new degree-2 hyperedges with one endpoint from each range,
/// skipping self-pairs and pairs already present as a hyperedge.
fn add_pairs(
    count: usize,
    left: std::ops::Range<usize>,
    right: std::ops::Range<usize>,
    existing: &mut HashSet<Vec<usize>>,
    out: &mut Vec<Vec<usize>>,
    rng: &mut Rng,
) -> Result<usize> {
    let budget = 1000 * (count + 1);
    let mut added = 0;
    let mut tries = 0;
    while added < count {
        tries += 1;
        if tries > budget || left.is_empty() || right.is_empty() {
            return Err(Error::GenerationFailed(format!("could only place {added} of {count} degree-2 hyperedges")));
        }
        let a = rng.gen_range(left.clone());
        let b = rng.gen_range(right.clone());
        if a == b {
            continue;
        }
        let key = pair_key(a, b);
        if existing.insert(key.clone()) {
            out.push(key);
            added += 1;
        }
    }
    Ok(added)
}

fn share(total: usize, parts: usize, i: usize) -> usize {
    total / parts + usize::from(i < total % parts)
}

/// What [`assemble_with_stats`] placed, per component.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub base_nodes: usize,
    pub base_hyperedges: usize,
    pub motifs: usize,
    /// Motif hyperedges, excluding the attaching pair per motif.
    pub motif_hyperedges: usize,
    pub perturbations: usize,
    pub inter_community_edges: usize,
    pub num_classes: usize,
}

/// Builds the benchmark hypergraph described by `spec`.
pub fn assemble_dataset(spec: &DatasetSpec) -> Result<Hypergraph> {
    Ok(assemble_with_stats(spec)?.0)
}

/// [`assemble_dataset`] plus counts of the generated parts.
pub fn assemble_with_stats(spec: &DatasetSpec) -> Result<(Hypergraph, DatasetStats)> {
    spec.validate()?;
    let mut stats = DatasetStats::default();
    let mut rng = rng::seeded(spec.seed);
    let motif = build_motif(spec.motif_kind);
    let mut hyperedges: Vec<Vec<usize>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut community_ranges = Vec::new();
    for c in 0..spec.num_communities {
        let offset = labels.len();
        let base_nodes = share(spec.target_base_nodes, spec.num_communities, c);
        let base = match spec.base_kind {
            BaseKind::Random => random_base(base_nodes, spec.bipartite, &mut rng)?,
            BaseKind::Tree => tree_base(tree_depth_for(base_nodes)?)?,
        };
        stats.base_nodes += base.num_nodes;
        stats.base_hyperedges += base.hyperedges.len();
        let label_shift = c * COMMUNITY_LABEL_OFFSET;
        labels.extend(std::iter::repeat(label_shift).take(base.num_nodes));
        hyperedges.extend(base.hyperedges.iter().map(|e| e.iter().map(|v| v + offset).collect()));
        for _ in 0..share(spec.num_motifs, spec.num_communities, c) {
            let start = labels.len();
            labels.extend(motif.labels.iter().map(|l| l + label_shift));
            hyperedges.extend(motif.hyperedges.iter().map(|e| e.iter().map(|v| v + start).collect()));
            let attach = offset + rng.gen_range(0..base.num_nodes);
            hyperedges.push(pair_key(start + motif.anchor, attach));
            stats.motifs += 1;
            stats.motif_hyperedges += motif.hyperedges.len();
        }
        community_ranges.push(offset..labels.len());
    }
    let num_nodes = labels.len();
    let mut existing: HashSet<Vec<usize>> = hyperedges
        .iter()
        .map(|e| {
            let mut k = e.clone();
            k.sort_unstable();
            k
        })
        .collect();
    stats.perturbations =
        add_pairs(spec.num_perturbations, 0..num_nodes, 0..num_nodes, &mut existing, &mut hyperedges, &mut rng)?;
    if spec.num_communities == 2 {
        let (a, b) = (community_ranges[0].clone(), community_ranges[1].clone());
        stats.inter_community_edges =
            add_pairs(spec.num_inter_community_edges, a, b, &mut existing, &mut hyperedges, &mut rng)?;
    }

    let features = match spec.feature_kind {
        FeatureKind::Ones => Tensor::filled(num_nodes, spec.feature_dim, 1.0),
        FeatureKind::BimodalNormal => {
            let mut data = Vec::with_capacity(num_nodes * spec.feature_dim);
            for (c, range) in community_ranges.iter().enumerate() {
                let dist = Normal::new(c as f64, 1.0).expect("unit variance");
                data.extend((0..range.len() * spec.feature_dim).map(|_| dist.sample(&mut rng)));
            }
            Tensor::new(num_nodes, spec.feature_dim, data)?
        }
    };

    let mut order: Vec<usize> = (0..num_nodes).collect();
    order.shuffle(&mut rng);
    let num_train = (0.8 * num_nodes as f64).round() as usize;
    let mut split = vec![Split::Val; num_nodes];
    for &v in &order[..num_train] {
        split[v] = Split::Train;
    }
    let g = Hypergraph::from_hyperedges(num_nodes, &hyperedges, features, Some(labels), Some(split))?;
    stats.num_classes = g.num_classes();
    Ok((g, stats))
}
