//! Numerical tolerances shared by the whole crate.

/// Structural identities: commutators, completeness, covariance, symmetries.
pub const STRUCTURAL: f64 = 1e-10;

/// Unitarity of rotation operators.
pub const UNITARY: f64 = 1e-12;

/// Accepted drift of a probability vector's total mass before it is
/// renormalized; larger drifts are rejected.
pub const PROBABILITY: f64 = 1e-10;

/// Tolerance on `|n| = 1` for directions.
pub const UNIT_NORM: f64 = 1e-10;

/// Symmetry `c[2s+1-k] = -c[k]` of discretization grids.
pub const GRID_SYMMETRY: f64 = 1e-12;

/// Minimal separation between consecutive cosines in the outer search.
pub const MIN_COSINE_GAP: f64 = 1e-6;
