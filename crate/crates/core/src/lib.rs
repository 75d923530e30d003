//! Ensemble control on manifolds.
//!
//! The crate integrates ensembles of points under control-affine systems on
//! ℝ^d, tori and the 2-sphere, computes exact gradients of the Bolza loss
//! through the discretized flow, and checks the Lie-algebraic machinery
//! (bracket generation, Hermite / Fourier / Laplace approximation) that makes
//! those systems ensemble controllable.
//!
//! Module map:
//!
//! * [`geometry`]: manifolds, points, exact polynomials on ℝ³, spherical calculus.
//! * [`fields`]: the control families, Lie brackets, seminorms, rank tests.
//! * [`approximation`]: Hermite, Fourier and spherical-harmonic series.
//! * [`dynamics`]: RK4 ensemble flows, continuous and discrete adjoints.
//! * [`solver`]: loss, gradient descent, PMP diagnostics, experiments.
//! * [`verify`]: named property suites used by `lieflow verify`.
//!
//! Data-parallel loops (per ensemble member, per quadrature node, per rank
//! column) go through [`exec`], which uses rayon when the `parallel` feature
//! is enabled and falls back to plain iteration otherwise.

pub mod approximation;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod jet;
pub mod quadrature;
pub mod solver;
pub mod tol;
pub mod verify;

pub use error::{Error, Result};
pub use exec::ExecMode;

/// Crate version embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
