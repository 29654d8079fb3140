//! Ostrowski-type error bounds for functions whose derivative, in absolute
//! value, is h-convex or h-concave.
//!
//! The crate evaluates the deviation `|f(x) - avg f|` and the right-hand
//! sides that bound it, certifies (by sampling) or refutes the hypotheses
//! those bounds rest on, and drives sweeps and counterexample searches that
//! produce deterministic JSON reports.

pub mod bounds;
pub mod expr;
pub mod harness;
pub mod hclass;
pub mod means;
pub mod quadrature;
pub mod scalar;
pub mod special;

pub use scalar::Real;

/// Quadrature result over `f64`.
pub type QuadResult = quadrature::QuadResult<f64>;
/// Supremum estimate over `f64`.
pub type SupEstimate = quadrature::SupEstimate<f64>;
