//! Joint memory-depth and kernel selection for generalized-memory-polynomial
//! digital predistortion.
//!
//! Kernels are grouped into blocks by polynomial order, each block carries its
//! own l1 weight, and the resulting block-weighted Lasso is solved by block
//! coordinate descent with an iterated-ridge inner solver. A simulated power
//! amplifier and an iterative-learning-control loop provide training labels,
//! and the [`pipeline`] module wires everything into reproducible
//! experiments.

pub mod error;
pub mod gmp;
pub mod pa_sim;
pub mod pipeline;
pub mod signal;
pub mod solver;

pub use error::{Error, Result};
