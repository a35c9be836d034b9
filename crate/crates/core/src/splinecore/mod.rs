//! Uni-variate and tensor-product B-spline spaces.

mod basis;
mod knots;
mod refine;

pub use basis::{Basis1D, Element1D, TensorBasis2D, MAX_DEGREE};
pub use knots::{KnotVector, KNOT_TOL};
pub use refine::{insert_knot, insert_knots, subdivision_matrix_to, SubdivisionMatrix};
