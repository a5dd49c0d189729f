//! Matrix-free simulation and verification of the poro-elastic plate:
//! a hinged Euler-Bernoulli plate on the unit square coupled to a pressure
//! field on `(0,1)^2 x (-h, h)` that diffuses only transversely.
//!
//! The in-plane direction is discretized exactly with sine modes; the
//! transverse direction with second-order finite differences. The
//! quasi-static system is stepped as the implicit equation
//! `[(c_p I + B) p]_t + A(t) p = g`, the inertial system through per-mode
//! resolvent solves of its dissipative generator.

pub mod discretization;
pub mod error;
pub mod model;
pub mod operators;
pub mod inertial;
pub mod quasistatic;
pub mod verify;
pub mod cli;

pub use error::{Error, Result};
