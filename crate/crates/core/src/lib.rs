//! Constrained GME-regularized estimation with smooth convex data fidelities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extrapolate;
pub mod gme_model;
pub mod harness;
pub mod linops;
pub mod losses;
pub mod problem_file;
pub mod proxfns;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
