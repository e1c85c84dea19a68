//! Numerical tolerances shared by every invariant check in the crate.

/// Algebraic identities: Hermiticity, idempotence, unit norms.
pub const ALGEBRAIC: f64 = 1e-12;

/// Spectral quantities: eigenvalues, traces of density matrices, PSD checks.
pub const SPECTRAL: f64 = 1e-10;
