//! Monotone multiscale finite-volume pressure solver.
//!
//! Fine-scale TPFA and MPFA-O discretizations, restricted-smoothing
//! multiscale bases, algebraic monotonicity repair of the coarse and fine
//! operators, and one-step and iterative two-level solves.

// `!(x > 0.0)` is used on purpose so NaN is rejected too; dense kernels
// index several arrays with one loop variable.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod discretization;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod monotone;
pub mod msrsb;
pub mod solver;

pub use error::{Error, Result};
