use std::fmt;
use std::sync::Arc;

use crate::trimming::Point;

/// Scalar coefficient `c(u1, u2)` of the mass integrand, pulled back to the
/// parameter domain.
#[derive(Clone)]
pub enum CoefficientField {
    Constant(f64),
    Function(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientField::Constant(c) => write!(f, "Constant({c})"),
            CoefficientField::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Default for CoefficientField {
    fn default() -> Self {
        CoefficientField::identity()
    }
}

impl CoefficientField {
    /// The coefficient of the identity geometry map.
    pub fn identity() -> Self {
        CoefficientField::Constant(1.0)
    }

    pub fn function(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        CoefficientField::Function(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            CoefficientField::Constant(c) => *c,
            CoefficientField::Function(f) => f(p),
        }
    }

    /// Values on the tensor grid `xs1 x xs2`.
    pub fn grid(&self, xs1: &[f64], xs2: &[f64]) -> Grid {
        let mut values = Vec::with_capacity(xs1.len() * xs2.len());
        for &x in xs1 {
            for &y in xs2 {
                values.push(self.eval([x, y]));
            }
        }
        Grid { n2: xs2.len(), values }
    }
}

/// Coefficient values on a tensor grid of points, row-major in direction 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n2: usize,
    values: Vec<f64>,
}

impl Grid {
    #[inline]
    pub fn get(&self, k1: usize, k2: usize) -> f64 {
        self.values[k1 * self.n2 + k2]
    }

    pub fn set(&mut self, k1: usize, k2: usize, v: f64) {
        self.values[k1 * self.n2 + k2] = v;
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.values.len().checked_div(self.n2).unwrap_or(0), self.n2)
    }
}
