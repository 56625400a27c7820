//! Dense kernels, a reverse-mode tape, a finite-difference oracle and Adam.

mod adam;
mod gradcheck;
mod matrix;
mod sparse;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{
    evaluate, evaluate_with_gradients, finite_difference_gradient, max_relative_error,
};
pub use matrix::{diag_inverse, Matrix};
pub use sparse::SparseMatrix;
pub use tape::{Tape, Var};
