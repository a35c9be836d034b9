use thiserror::Error;

/// Errors raised while building spline spaces, quadrature rules, trimmed
/// configurations, matrices or projections.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("parameter u = {u} lies outside the domain [{lo}, {hi}]")]
    Domain { u: f64, lo: f64, hi: f64 },

    #[error("invalid knot vector: {0}")]
    InvalidKnotVector(String),

    #[error("knot u = {u} already has multiplicity {m}; inserting it again would exceed p + 1 = {}", p + 1)]
    Multiplicity { u: f64, m: usize, p: usize },

    #[error("target knot vector is not a refinement of the source knot vector")]
    NotNested,

    #[error("a Gauss rule needs at least one point")]
    ZeroPoints,

    #[error("moment fitting for test function {test} failed: residual {residual:e} exceeds {tolerance:e}")]
    MomentFit { test: usize, residual: f64, tolerance: f64 },

    #[error("u = {0} is not a breakpoint of the basis")]
    NotBreakpoint(f64),

    #[error("unsupported trimming configuration: {0}")]
    UnsupportedTrim(String),

    #[error("decomposition of cut element ({}, {}) failed: {reason}", element.0, element.1)]
    Decomposition { element: (usize, usize), reason: String },

    #[error("sub-cell map of element ({}, {}) has a non-positive Jacobian ({det:e})", element.0, element.1)]
    NegativeJacobian { element: (usize, usize), det: f64 },

    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    NotSpd { pivot: usize, value: f64 },

    #[error("condition estimate {estimate:e} exceeds the guard {limit:e}; smallest trimmed supports at dofs {dofs:?}")]
    IllConditioned { estimate: f64, limit: f64, dofs: Vec<usize> },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("target function has zero norm on the valid domain")]
    ZeroNorm,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
