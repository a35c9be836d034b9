//! Mass-matrix formation: element-wise Gauss, weighted quadrature with sum
//! factorization, hybrid Gauss, and discontinuous weighted quadrature.

mod field;
mod form;
mod sparse;
mod sumfact;

pub use field::{CoefficientField, Grid};
pub use form::{
    assemble, assemble_dwq, assemble_gauss_reference, assemble_hybrid, assemble_wq, cut_degree, cut_points, form_with_timings,
    FormOptions, FormationReport, Strategy,
};
pub use sparse::SparseMatrix;
pub use sumfact::{sum_factor_row, sum_factor_row_reversed, Rule1D, Window};
