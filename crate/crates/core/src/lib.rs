//! Spectral edge-robustness scoring and pruning for graph convolutional
//! networks.
//!
//! The workflow trains a two-layer GCN, builds a k-nearest-neighbor graph over
//! its hidden-layer embeddings, compares the input graph against that manifold
//! through a generalized Laplacian eigenproblem, scores every edge, prunes the
//! least robust ones, and measures how both graphs hold up under a
//! model-aware edge-injection attack.

pub mod attack;
pub mod dataset;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod linalg;
pub mod manifold;
pub mod pipeline;
pub mod prune;
pub mod spectral;

pub use error::{Error, Result};
pub use gcn::{GcnHyper, GcnModel, Mode, TrainReport};
pub use graph::{gcn_normalized_adjacency, LaplacianKind, LaplacianOperator, SparseGraph};
pub use linalg::{CsrMatrix, DenseMatrix};
