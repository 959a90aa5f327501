//! Deterministic numerical kernel shared by every analysis module.

mod dist;
mod eigen;
mod matrix;
mod ols;
mod special;

use thiserror::Error;

pub use dist::{f_tail, t_cdf, t_tail};
pub use eigen::{
    power_iteration, reconstruct, sym_eigen, EigenPair, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_TOL,
};
pub use matrix::{Matrix, SymMatrix};
pub use ols::{ols, OlsFit};
pub use special::{ln_beta, ln_gamma, reg_inc_beta};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("entry ({row}, {col}) is not strictly positive")]
    NotPositive { row: usize, col: usize },
    #[error("matrix is singular at column {column}")]
    Singular { column: usize },
    #[error("design matrix is rank deficient: column {column} is a linear combination of earlier columns")]
    SingularDesign { column: usize },
    #[error("{observations} observations cannot identify {parameters} parameters")]
    Underdetermined {
        observations: usize,
        parameters: usize,
    },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("power iteration did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last: Box<EigenPair>,
    },
    #[error("domain error: {0}")]
    Domain(String),
}
