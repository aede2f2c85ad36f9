//! Numerical tolerances shared across the crate.

/// Hermiticity, relative to `max(1, max |m_ij|)`.
pub const HERMITIAN: f64 = 1e-9;
/// Smallest admissible eigenvalue of a positive semidefinite matrix.
pub const PSD: f64 = 1e-9;
/// Trace checks.
pub const TRACE: f64 = 1e-9;
/// `sum A^dagger A = I` and `sum E = I`, elementwise.
pub const COMPLETENESS: f64 = 1e-9;
/// Unit 2-norm of pure-state amplitude vectors.
pub const UNIT_NORM: f64 = 1e-12;
/// Probabilities in `[-PROBABILITY_CLAMP, 0)` are reported as zero.
pub const PROBABILITY_CLAMP: f64 = 1e-12;
/// Relaxed positivity floor for integrated states.
pub const INTEGRATOR_PSD: f64 = 1e-7;

/// Trace drift allowed over an integration.
pub const INTEGRATOR_TRACE: f64 = 1e-8;
/// Residual norm below which a completion candidate is skipped.
pub const COMPLETION_RESIDUAL: f64 = 1e-8;
/// Conditioning on outcomes less likely than this is refused.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-15;

pub const DEFAULT_DIM_CAP: usize = 4096;
