//! Shadowing, random periodic points and random horseshoes for the skew product
//! `φ(x, ω) = (A x + h(ω), ω + α)` on `T² × T¹`, where `A` is a hyperbolic
//! integer matrix and the base is an irrational rotation.
//!
//! Module layout follows the computation:
//!
//! * [`torus`]: angles, fiber points, metrics and winding degrees.
//! * [`system`]: the cocycle, its splitting and the shadowing constants.
//! * [`pseudo_orbit`]: partitions, return structures and the three pseudo-orbit builders.
//! * [`shadowing`]: exact and iterative shadowing solvers plus their certificates.
//! * [`structures`]: periodic graphs, the degree obstruction, horseshoes, weak horseshoes
//!   and graph measures.
//! * [`measures`]: Bowen metric, separated counts, entropy slopes and Weyl sums.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dd;
pub mod error;
pub mod lattice;
pub mod measures;
pub mod pseudo_orbit;
pub mod shadowing;
pub mod structures;
pub mod system;
pub mod torus;

pub use error::{Error, Result};
