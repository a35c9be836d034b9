//! Gauss rules, weighted quadrature by moment fitting, and discontinuous
//! weighted quadrature through knot insertion.

mod discontinuous;
mod gauss;
mod layout;
mod weighted;

pub use discontinuous::{build_dwq, DiscontinuousRuleSet, Side};
pub use gauss::{gauss_lobatto_nodes, GaussRule};
pub use layout::{place_wq_points, required_counts, PointLayout};
pub use weighted::{exact_moments, BasisTable, RowDump, RuleDump, WeightRow, WeightedRuleSet, MAX_ENRICHMENT, MOMENT_TOL};
