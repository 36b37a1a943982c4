//! Locally linear embedding with classical regularized weights and low-dimensional
//! neighborhood representation (LDR) weights.

pub mod cli;
pub mod datasets;
pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod neighbors;
pub mod rng;
pub mod weights;

pub use datasets::{GeneratedSample, Generator, PointCloud};
pub use embedding::{build_m, embed, embed_with, phi, EigenSolver, Embedding};
pub use error::{LleError, Result};
pub use neighbors::{knn, neighborhood_matrix, NeighborGraph, NeighborhoodMatrix};
pub use weights::{
    assemble_weight_matrix, ldr_weights, lle_weights, neighborhood_spectrum, NeighborhoodSpectrum,
    SparseWeightMatrix, WeightMethod, WeightVector,
};
