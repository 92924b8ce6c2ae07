//! Numerical tolerances shared across the crate.
//!
//! Every threshold that feeds a pass/fail decision lives here so that tests,
//! the CLI and the library agree on what "holds" means.

/// Relative Frobenius tolerance for the residual identity `VB + HᵀA = B`.
pub const RESIDUAL_IDENTITY: f64 = 1e-8;

/// Relative singular-value cutoff used for rank decisions.
pub const RANK: f64 = 1e-10;

/// Agreement between an operator norm and its brute-force oracle.
pub const NORM_ORACLE: f64 = 1e-9;

/// Default duality-gap / feasibility tolerance for linear programs.
pub const LP_TOL: f64 = 1e-8;

/// Default tolerance for programs with second-order cones.
pub const SOCP_TOL: f64 = 1e-6;

/// L∞ recovery error at or below which a recovery counts as exact.
pub const EXACT_RECOVERY: f64 = 1e-6;

/// Slack allowed on certificate margins produced by the synthesis routines.
pub const CERTIFICATE_MARGIN: f64 = 1e-8;

/// Slack on the nullspace-property ratio test `L_{s,1}(Bx) ≥ ½ L₁(Bx)`.
pub const NULLSPACE_RATIO: f64 = 1e-7;

/// Stationarity tolerance for the proximal group-Lasso solver.
pub const LASSO_STATIONARITY: f64 = 1e-7;

/// Default iteration cap of the subgradient method.
pub const SUBGRADIENT_MAX_ITER: usize = 5000;

/// Recovery programs are declared to be at most this far from feasibility.
pub const RECOVERY_FEASIBILITY: f64 = 1e-7;
