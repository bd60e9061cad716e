//! Entropic measurement-uncertainty quantities for spin-`s` systems.
//!
//! The crate computes the transition tables `q(m|l,h)` of covariant approximate
//! joint measurements of all spin components, the resulting device and minimum
//! information losses, the optimal discretization of the sphere, and the
//! cloning-based bounds for two and three orthogonal components.
//!
//! Layout, bottom-up:
//!
//! | module | contents |
//! |--------|----------|
//! | [`spin`] | half-integer bookkeeping, spin matrices, rotations, projections |
//! | [`wigner`] | small-d matrix and the polynomials `|d(θ)|²` in `x = cos θ` |
//! | [`qcoeff`] | discretization grids, q-tables, approximating marginals |
//! | [`infoloss`] | relative entropy, device loss, visibility and noise |
//! | [`lp`] | dense simplex used by the inner max-min problem |
//! | [`minimize`] | the max-min search and the closed-form optima for `s ≤ 3/2` |
//! | [`orthogonal`] | two and three orthogonal components, cloning bounds, orderings |
//!
//! All entropies are in bits.

// `!(x > 0.0)` style guards reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod infoloss;
pub mod lp;
pub mod minimize;
pub mod orthogonal;
pub mod output;
pub mod qcoeff;
pub mod spin;
pub mod tol;
pub mod wigner;

pub use error::{Error, Result};
pub use spin::{Direction, MagneticIndex, SpinValue};
