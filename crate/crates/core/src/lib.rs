//! Event-driven simulator and verification harness for the symmetric
//! exclusion process on the discrete torus.
//!
//! The engine counts every attempted jump per directed edge, split into
//! realized jumps and collisions, and rescales the counts into empirical
//! measure, flux and collision fields. Closed-form heat-equation references,
//! a stirring-duality oracle for correlation functions, and replica
//! statistics turn the scaling limits into pass/fail checks.

// `!(x >= 0.0)` deliberately rejects NaN alongside negatives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod engine;
pub mod error;
pub mod harness;
pub mod initcond;
pub mod limits;
pub mod observables;
pub mod regimes;
pub mod rng;
pub mod series;
pub mod stats;
pub mod testfn;
pub mod torus;

pub use error::{Error, Result};
