use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate link (node {node}, hyperedge {hyperedge})")]
    DuplicateLink { node: usize, hyperedge: usize },
    #[error("link references node {node} but the hypergraph has {num_nodes} nodes")]
    DanglingId { node: usize, num_nodes: usize },
    #[error("hyperedge {0} has no members")]
    EmptyHyperedge(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("subhypergraph is not contained in its reference subhypergraph")]
    NotASubset,
    #[error("subhypergraphs belong to different parent hypergraphs")]
    ParentMismatch,
    #[error("node {node} out of range for {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error("unknown kind `{0}`")]
    UnknownKind(String),
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("hypergraph has no labels or no train/val split")]
    MissingLabels,
    #[error("model does not use attention aggregation")]
    NotAnAttentionModel,
    #[error("gradient requested for non-scalar output of shape {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("k = {k} exceeds the number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("concept {0} has no members")]
    EmptyConcept(usize),
    #[error("no instances to evaluate")]
    EmptyInput,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
