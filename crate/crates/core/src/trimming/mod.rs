//! Trimming curves, element and function classification, and quadrature on
//! cut elements.

mod cases;
mod classify;
mod curve;
mod cutcell;

pub use cases::{case_domain, CaseName, CaseParams, TrimmedDomain};
pub use classify::{BasisClass, BoxSide, CutFunction, DwqPlan, ElementClass, TrimConfiguration};
pub use curve::{AxisSegment, CurveKind, EdgeHit, Point, PointClass, TrimmingCurve, ON_CURVE_TOL};
pub use cutcell::{
    decompose_cut_element, CellEdge, CutCellQuadrature, CutElementRule, Rect, SubCell, MAX_CELL_DEGREE,
    MAX_SPLIT_DEPTH, SNAP_TOL,
};
