//! Sparse storage, iterative solvers and small dense oracles.

pub mod cg;
pub mod dense;
pub mod direct;
pub mod saddle;
pub mod sparse;

pub use cg::{cg_solve, pcg, BlockJacobi, CgOptions, CgOutcome, Jacobi, LinearOperator, PreconditionerKind};
pub use direct::direct_solve;
pub use saddle::{saddle_solve, saddle_solve_direct, SaddleSolution, SaddleSystem};
pub use sparse::{BlockSparse, CsrMatrix};
