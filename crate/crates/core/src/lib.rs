//! Numerical and exact Jordan-Chevalley decompositions, normalized power
//! sequences, and a finite model of sequences of matrices.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eig;
pub mod error;
pub mod jc;
pub mod matrix;
pub mod nps;
pub mod partition;
pub mod random;
pub mod rational;
pub mod seq;
pub mod triangular;
pub mod unbounded;

pub use error::{Error, Result};
pub use matrix::{c64, CMatrix, C64};
