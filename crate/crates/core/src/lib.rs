//! Post-hoc explanations for hypergraph neural networks.
//!
//! The crate bundles everything needed to go from a hypergraph to evaluated
//! explanations: synthetic benchmark generators ([`synthetic`]), a small
//! message-passing model with per-link masking ([`model`]) trained through a
//! minimal reverse-mode engine ([`autodiff`]), the instance-level explainer that
//! searches discrete subhypergraphs by Gumbel-Softmax sampling ([`explain`]),
//! concept-based global explanations ([`concepts`]), generalized fidelity
//! metrics ([`metrics`]), top-n baselines ([`baselines`]) and an experiment
//! driver ([`harness`]) with Graphviz export ([`dot`]).

pub mod autodiff;
pub mod baselines;
pub mod concepts;
pub mod dot;
pub mod error;
pub mod explain;
pub mod harness;
pub mod hypergraph;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use hypergraph::{computational_subhypergraph, Hypergraph, Subhypergraph};
