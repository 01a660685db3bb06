//! Chance-constrained velocity-obstacle navigation with a distance-dependent
//! Gaussian perception model, a 2D crowd simulator and a benchmark harness.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod chance;
pub mod config;
pub mod error;
pub mod geom;
pub mod perception;
pub mod planner;
pub mod sim;

pub use error::{Error, Result};
