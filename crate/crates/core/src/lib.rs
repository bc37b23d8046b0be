//! Guaranteed inner-approximations of reachable sets of nonlinear ODEs,
//! computed with zonotopic boundary analysis.
//!
//! The library is organized around a small set of building blocks:
//!
//! * [`zonotope`] — the [`zonotope::Zonotope`] value type and its
//!   elementary geometry (cross products, linear images, Minkowski sums,
//!   volumes, support functions).
//! * [`boundary`] — exact facet enumeration of a full-dimensional zonotope
//!   and the row-per-facet boundary-matrix encoding.
//! * [`tiling`] — splitting a zonotope into non-overlapping sub-zonotopes
//!   and refining facets of a boundary.
//! * [`lp`] — a dense two-phase simplex kernel plus the zonotope queries
//!   (intersection ranges, disjointness, containment) built on it.
//! * [`expr`] / [`ode`] — parsed ODE right-hand sides, symbolic
//!   differentiation, interval evaluation, an adaptive Runge–Kutta
//!   integrator and the bundled benchmark registry.
//! * [`outer`] — a self-contained conservative one-step outer-approximation
//!   of the flow.
//! * [`inner`] — contraction of outer-approximations against propagated
//!   boundary pieces, candidate verification through the time-inverted
//!   flow, and the step/horizon drivers.
//! * [`metrics`] — width-ratio precision and Monte-Carlo soundness checks.
//!
//! All types are immutable values and all operations are pure functions; it
//! is safe to share them across threads.

pub mod boundary;
pub mod error;
pub mod expr;
pub mod inner;
pub mod interval;
pub mod linalg;
pub mod lp;
pub mod metrics;
pub mod ode;
pub mod outer;
pub mod tiling;
pub mod zonotope;

pub use error::{Error, Result};
pub use zonotope::{IntervalBox, Zonotope};

/// Relative zero threshold shared by rank tests, inner products and minors.
///
/// A quantity is treated as zero when its magnitude is at most this factor
/// times the scale of its operands.
pub const DEFAULT_TOL: f64 = 1e-9;
