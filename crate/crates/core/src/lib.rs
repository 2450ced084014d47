//! Simulation toolkit for poisoning- and eavesdropping-resistant quantum
//! machine learning primitives: robust PCA through a median oracle and
//! noisy-oracle Hamiltonian simulation, eigenspace boosting, and a private
//! k-means protocol.

pub mod boosting;
pub mod embedding;
pub mod error;
pub mod kmeans;
pub mod lcu;
pub mod linalg;
pub mod median_search;
pub mod noisy;
pub mod qpca;
pub mod rng;
pub mod statevec;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, Complex64, EigenDecomposition, Hermitian};
