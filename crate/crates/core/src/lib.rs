//! Mass-matrix formation and L2 projection on trimmed bi-variate B-spline
//! spaces.
//!
//! Four formation strategies share one trimmed configuration: element-wise
//! Gauss (the reference), naive weighted quadrature, hybrid Gauss, and
//! discontinuous weighted quadrature. The fast strategies assemble row by
//! row with sum factorization.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod projection;
pub mod quadrature;
pub mod splinecore;
pub mod trimming;

pub use error::{Error, Result};
