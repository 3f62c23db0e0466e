//! Sparse matrices, Krylov solvers, preconditioners and the block Jacobian solve.

mod block;
mod krylov;
pub mod precond;
mod sparse;

pub use block::{assemble_schur, BlockSolution, BlockSystem};
pub use krylov::{cg, gmres, krylov_solve, KrylovConfig, KrylovMethod, KrylovReport};
pub use precond::{Preconditioner, PreconditionerKind};
pub use sparse::{dot, norm2, project_zero_mean, CsrMatrix};
