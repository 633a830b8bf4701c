//! Solvers for semilinear parabolic equations with a Caputo time derivative
//! of order `alpha` in (0, 1).
//!
//! Time is discretized by the L1 scheme on (quasi-)graded temporal meshes and
//! space by a standard finite-difference operator on tensor-product grids.
//! Every time level reduces to a monotone semilinear elliptic system, which
//! is solved by damped Newton iteration. The crate also contains the
//! verification machinery used to check range preservation, discrete
//! stability envelopes and pointwise-in-time convergence rates.
//!
//! Module map:
//!
//! - [`temporal_mesh`]: graded meshes, quasi-graded check, step restriction
//! - [`caputo_l1`]: L1 weights in kappa form and history accumulation
//! - [`nonlinearity`]: reaction terms and their structural constants
//! - [`scalar_solver`]: the problem without spatial derivatives
//! - [`spatial_fd`]: finite-difference operator and boundary handling
//! - [`pde_solver`]: full discretization, level by level
//! - [`special_functions`]: Gamma and Mittag-Leffler functions
//! - [`stability_lab`]: discrete resolvent, envelopes and barriers
//! - [`error_harness`]: two-mesh errors, rates and table reproduction

pub mod caputo_l1;
pub mod error;
pub mod error_harness;
pub mod linalg;
pub mod nonlinearity;
pub mod pde_solver;
pub mod scalar_solver;
pub mod spatial_fd;
pub mod special_functions;
pub mod stability_lab;
pub mod temporal_mesh;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
