//! Sparse linear algebra used by the per-level Newton solves.
//!
//! Matrices are stored in compressed sparse row form. The systems that arise
//! are M-matrices (diagonally dominant, nonpositive off-diagonals), so the
//! direct solvers below factor without pivoting where noted.

mod csr;
mod dense;
mod krylov;
mod multigrid;

pub use csr::CsrMatrix;
pub use dense::{BandedLu, DenseLu};
pub use krylov::{bicgstab, pcg, IdentityPreconditioner, Jacobi, Preconditioner, SolveStats};
pub use multigrid::Multigrid;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
