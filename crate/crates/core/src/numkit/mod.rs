//! Dense tensors, CSR matrices, reverse-mode autodiff, Adam, gradient
//! checking and a Jacobi eigensolver.

mod adam;
mod eig;
mod gradcheck;
mod sparse;
mod tape;
mod tensor;

pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use eig::{symmetric_eig, SymmetricEigen};
pub use gradcheck::{grad_check, DEFAULT_EPS as GRAD_CHECK_EPS};
pub use sparse::SparseMatrix;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{dot, Tensor, NORM_EPS};
