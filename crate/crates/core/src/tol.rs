//! Tolerances shared by property checks and acceptance tests.

/// Checks that only involve exact polynomial algebra evaluated in f64.
pub const EXACT: f64 = 1e-12;

/// Checks mixing several numeric stages (nested Jacobians, quadrature).
pub const MIXED: f64 = 1e-9;

/// Central finite-difference comparisons.
pub const FINITE_DIFF: f64 = 1e-6;

/// Largest admissible `| |x| - 1 |` for a point handed to sphere operations.
pub const SPHERE_ACCEPT: f64 = 1e-9;

/// Tangency requirement for sphere tangent vectors, relative to `|v|`.
pub const TANGENCY: f64 = 1e-10;

/// Minimum pairwise distance between ensemble members.
pub const DISTINCT: f64 = 1e-9;

/// Relative singular-value cutoff for numerical rank.
pub const RANK_RELATIVE: f64 = 1e-8;
