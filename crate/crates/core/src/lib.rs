//! Sparse quadratic forms of random Gram matrices.
//!
//! The crate computes compatibility constants and restricted eigenvalues of
//! Gram matrices, evaluates closed-form concentration bounds for them, and
//! checks those bounds by seeded Monte Carlo over a family of row ensembles.

pub mod bounds;
pub mod cli;
pub mod constants;
pub mod ensembles;
pub mod error;
pub mod matcore;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
