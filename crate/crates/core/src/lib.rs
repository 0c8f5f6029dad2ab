//! Graph-side building blocks for self-supervised link prediction.
//!
//! * [`graph`]: immutable undirected graphs, feature matrices, link splits and
//!   negative pair sampling.
//! * [`sparse`]: CSR matrices and the symmetric GCN propagation matrix.
//! * [`dataset`]: edge-list ingestion, id maps and dataset manifests.
//! * [`community`]: block states, Louvain and modularity.
//! * [`sbm`]: microcanonical stochastic block model fitting and sampling.
//! * [`augment`]: the view generators used during contrastive training.
//! * [`seed`]: hierarchical seed derivation shared by every random step.

pub mod augment;
pub mod community;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod sbm;
pub mod seed;
pub mod sparse;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeSet, EdgeSplit, FeatureKind, FeatureMatrix, Graph};
