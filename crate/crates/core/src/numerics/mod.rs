//! Small dense linear-algebra kernels: LU solves, eigenvalues, singular values,
//! the discrete Riccati equation and forward differences.
//!
//! Everything here is hand-rolled for matrices of order at most 8 so results
//! stay reproducible across platforms.

mod dare;
mod diff;
mod eigen;
mod lu;
mod matrix;
mod svd;

use thiserror::Error;

pub use dare::{solve_dare, DareOptions, DareSolution};
pub use diff::{forward_difference_column, forward_difference_column_with_base};
pub use eigen::{eigenvalues, spectral_radius, MAX_DIM};
pub use lu::{determinant, solve_2x2, solve_linear, Lu, PIVOT_FLOOR};
pub use matrix::Matrix;
pub use num_complex::Complex64;
pub use svd::singular_values;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error("Riccati iteration failed: {0}")]
    NotStabilizable(String),
}
