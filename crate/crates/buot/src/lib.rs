//! Grid-based solver for the Beckmann formulation of balanced and unbalanced
//! optimal transport.
//!
//! The balanced problem minimizes the total flux magnitude subject to
//! `div_h(m) = rho0 - rho1` (its optimum is the Wasserstein-1 distance); the
//! unbalanced variant adds a pointwise source `eta` with weight `alpha`, so
//! mass can be created or destroyed at a price. Both are solved by a
//! primal-dual hybrid gradient iteration on node-centered rectangular grids
//! with zero-flux boundary conditions.
//!
//! Modules:
//! - [`grid`]: meshes, scalar/flux fields, divergence/gradient, weighted norms
//! - [`prox`]: shrinkage operators used inside the iteration
//! - [`pdhg`]: the solver, step-size selection, stopping gap, solutions
//! - [`oracle`]: dense simplex ground truth for small `p = 1` instances
//! - [`imaging`]: density ingestion and the histogram color-transfer pipeline
//! - [`generators`]: built-in synthetic density pairs

pub mod generators;
pub mod grid;
pub mod imaging;
pub mod oracle;
pub mod pdhg;
pub mod prox;

pub use grid::{FluxField, FluxNorm, Grid, GridError, ScalarField};
pub use pdhg::{solve, SolveError, SolverConfig, Solution};
