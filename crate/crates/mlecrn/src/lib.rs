//! Compiles log-linear statistical models into mass-action reaction networks.
//!
//! Given an integer design matrix with equal column sums, this crate builds
//! chemical reaction networks whose equilibria encode the maximum-likelihood
//! distribution (and optionally the maximum-likelihood parameter estimate)
//! for observed count data, simulates them deterministically, and checks the
//! simulated equilibria against a direct convex-optimization solver.

pub mod cli;
pub mod crn;
pub mod dynamics;
pub mod inference;
pub mod matrix;
