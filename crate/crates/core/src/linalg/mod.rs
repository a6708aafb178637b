//! Sparse storage, factorizations, eigensolvers and exact ranks.

pub mod eigen;
pub mod rank;
pub mod sparse;

pub use eigen::{
    dense_generalized, relative_residual, shift_invert_lowest, shift_invert_lowest_deflated, EigenError, EigenPairs,
    KrylovDiagnostics, KrylovOptions,
};
pub use rank::{float_rank, integer_rank, IntMatrix, RankError};
pub use sparse::{negative_inertia, CsrMatrix, FactorError, SparseCholesky, Triplets};
