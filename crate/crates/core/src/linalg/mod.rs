//! Sparse symmetric linear algebra for the Newton normal equations.
//!
//! - [`SparseSymMatrix`]: lower-triangular CSC storage of a symmetric matrix.
//! - [`sparse_cholesky`]: fill-reducing (AMD) sparse Cholesky.
//! - [`sparse_cholesky_mmatrix`]: the same factorization for diagonally
//!   dominant matrices with nonpositive off-diagonals, computing every pivot
//!   from an explicitly tracked diagonal excess so that nearly singular
//!   graph-Laplacian systems are factored accurately.
//! - [`incomplete_cholesky`]: zero-fill IC(0) preconditioner.
//! - [`pcg`]: preconditioned conjugate gradients.
//! - [`connected_components`]: components of the bipartite graph of a
//!   nonnegative matrix.

mod cholesky;
mod components;
mod incomplete;
mod ordering;
mod pcg;
mod sparse;

pub use cholesky::{sparse_cholesky, sparse_cholesky_mmatrix, CholFactor};
pub(crate) use components::connected_components_from_edges;
pub use components::{connected_components, ComponentLabels};
pub use incomplete::{incomplete_cholesky, IncompleteCholesky};
pub use ordering::amd_ordering;
pub use pcg::{pcg, PcgSolution};
pub use sparse::{SparseMatrix, SparseSymMatrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix has dimension zero")]
    EmptyMatrix,
    #[error("index {index} out of bounds for dimension {dim}")]
    IndexOutOfBounds { index: usize, dim: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("diagonal entry {0} is not stored")]
    MissingDiagonal(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
    #[error("off-diagonal entry ({row}, {col}) is positive; expected an M-matrix")]
    PositiveOffDiagonal { row: usize, col: usize },
    #[error("incomplete factorization broke down after {attempts} diagonal shifts")]
    DecompositionFailed { attempts: usize },
    #[error(
        "conjugate gradients stopped after {iterations} iterations with residual {residual:e}"
    )]
    NotConverged {
        best: Vec<f64>,
        iterations: usize,
        residual: f64,
    },
    #[error("fill-reducing ordering failed")]
    OrderingFailed,
}

/// A symmetric linear map `x -> A x` of fixed dimension.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        SparseSymMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Approximate inverse used by [`pcg`]: `z = M^{-1} r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

impl Preconditioner for CholFactor {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.solve_in_place(z);
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
