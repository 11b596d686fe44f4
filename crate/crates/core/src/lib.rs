//! Unsupervised node embeddings learned by maximizing mutual information
//! across a graph's feature view (a KNN graph over node features) and its
//! topology view.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense/sparse matrices, a define-by-run tape, Adam, Glorot init
//! - [`graphdata`]: dataset model, on-disk format, normalization, splits, corruption
//! - [`featgraph`]: cosine (or euclidean) KNN feature graph
//! - [`synthgen`]: feature-driven and community-driven synthetic benchmarks
//! - [`model`]: GCN encoders, fusion, readouts, bilinear discriminators, decoder
//! - [`objectives`]: JS mutual-information terms, reconstruction, disagreement, total
//! - [`pipeline`]: training loops, checkpoints, embedding export
//! - [`evalkit`]: linear probe, k-means, NMI/ARI, Calinski-Harabasz, silhouette
//! - [`cli`]: the `mvmift` command-line front end

pub mod cli;
pub mod error;
pub mod evalkit;
pub mod featgraph;
#[cfg(test)]
mod golden;
pub mod graphdata;
pub mod model;
pub mod numerics;
pub mod objectives;
pub mod pipeline;
pub mod synthgen;

pub use error::{Error, Result};
pub use numerics::{Matrix, SparseMatrix};
