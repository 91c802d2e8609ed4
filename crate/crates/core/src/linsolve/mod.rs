//! Sparse matrices and the linear solvers used by assembly and time stepping.

mod cg;
mod direct;
mod matrix_market;
mod sparse;

pub use cg::cg_solve;
pub use direct::{factor_solve, is_positive_definite, LuFactor};
pub use matrix_market::{read_matrix_market, write_matrix_market};
pub use sparse::{axpy, dot, norm2, SparseMatrix};
