use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::gauss::GaussRule;
use super::layout::{place_wq_points, PointLayout};
use crate::error::{Error, Result};
use crate::splinecore::Basis1D;

/// Relative residual accepted for a moment-fitted weight row.
pub const MOMENT_TOL: f64 = 1e-12;

/// Enrichment rounds before moment fitting gives up.
pub const MAX_ENRICHMENT: usize = 5;

/// Non-zero basis values at every point of a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    degree: usize,
    first: Vec<usize>,
    values: Vec<f64>,
}

impl BasisTable {
    pub fn new(basis: &Basis1D, points: &[f64]) -> Self {
        let p = basis.degree();
        let mut first = Vec::with_capacity(points.len());
        let mut values = vec![0.0; points.len() * (p + 1)];
        for (k, &x) in points.iter().enumerate() {
            let span = basis.knot_vector().find_span(x).expect("layout points lie in the domain");
            basis.eval_span_into(span, x, &mut values[k * (p + 1)..(k + 1) * (p + 1)]);
            first.push(span - p);
        }
        BasisTable { degree: p, first, values }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    /// First non-zero function index and the `p + 1` values at point `k`.
    #[inline]
    pub fn at(&self, k: usize) -> (usize, &[f64]) {
        let w = self.degree + 1;
        (self.first[k], &self.values[k * w..(k + 1) * w])
    }

    /// `B_j(x_k)`, zero when `j` is not active at the point.
    #[inline]
    pub fn value(&self, j: usize, k: usize) -> f64 {
        let (f, v) = self.at(k);
        if j >= f && j - f <= self.degree {
            v[j - f]
        } else {
            0.0
        }
    }
}

/// Quadrature weights of one test function on a contiguous point range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightRow {
    pub start: usize,
    pub weights: Vec<f64>,
}

impl WeightRow {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.weights.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(k, &w)| (self.start + k, w))
    }
}

/// `int B_i B_j du` for every `j` in `basis.overlapping(i)`, by element-wise
/// `(p + 1)`-point Gauss (exact for the piecewise degree-`2p` integrand).
pub fn exact_moments(basis: &Basis1D, i: usize) -> Vec<f64> {
    let p = basis.degree();
    let trials = basis.overlapping(i);
    let lo = *trials.start();
    let mut b = vec![0.0; trials.count()];
    let g = GaussRule::new(p + 1).expect("p + 1 >= 1");
    let mut vals = vec![0.0; p + 1];
    for e in basis.support_elements(i) {
        let el = basis.elements()[e];
        let first = basis.first_active(e);
        for (x, w) in g.mapped(el.lo, el.hi) {
            basis.eval_span_into(el.span, x, &mut vals);
            let bi = vals[i - first];
            for (r, v) in vals.iter().enumerate() {
                b[first + r - lo] += w * bi * v;
            }
        }
    }
    b
}

/// Minimum-norm solution of the moment system for test `i`, via a QR
/// factorisation of the transposed system. Returns the row and the
/// relative residual.
pub(crate) fn fit_row(
    basis: &Basis1D,
    layout: &PointLayout,
    table: &BasisTable,
    i: usize,
) -> (WeightRow, f64) {
    let pts = layout.point_range(basis.support_elements(i));
    let trials = basis.overlapping(i);
    let j0 = *trials.start();
    let nt = trials.clone().count();
    let b = exact_moments(basis, i);
    let np = pts.len();
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if np < nt {
        return (WeightRow { start: pts.start, weights: vec![0.0; np] }, f64::INFINITY);
    }
    // A^T: points x trials
    let at = DMatrix::from_fn(np, nt, |k, j| table.value(j0 + j, pts.start + k));
    let qr = at.clone().qr();
    let r = qr.r();
    let rmax = (0..nt).fold(0.0f64, |m, d| m.max(r[(d, d)].abs()));
    if (0..nt).any(|d| r[(d, d)].abs() <= 1e-13 * rmax) {
        return (WeightRow { start: pts.start, weights: vec![0.0; np] }, f64::INFINITY);
    }
    // R^T y = b
    let mut y = DVector::zeros(nt);
    for row in 0..nt {
        let mut s = b[row];
        for c in 0..row {
            s -= r[(c, row)] * y[c];
        }
        y[row] = s / r[(row, row)];
    }
    let w = qr.q() * y;
    let res = at.transpose() * &w;
    let resid = res.iter().zip(&b).fold(0.0f64, |m, (a, e)| m.max((a - e).abs()));
    let rel = if bmax > 0.0 { resid / bmax } else { resid };
    (WeightRow { start: pts.start, weights: w.iter().copied().collect() }, rel)
}

/// Fits rows for `tests`, enriching the layout until every residual passes.
pub(crate) fn fit_with_enrichment(
    basis: &Basis1D,
    mut layout: PointLayout,
    tests: &[usize],
    parallel: bool,
) -> Result<(PointLayout, BasisTable, Vec<(WeightRow, f64)>)> {
    for round in 0..=MAX_ENRICHMENT {
        let table = BasisTable::new(basis, layout.points());
        let rows: Vec<(WeightRow, f64)> = if parallel {
            tests.par_iter().map(|&i| fit_row(basis, &layout, &table, i)).collect()
        } else {
            tests.iter().map(|&i| fit_row(basis, &layout, &table, i)).collect()
        };
        let failing: Vec<usize> = tests
            .iter()
            .zip(&rows)
            .filter(|(_, (_, r))| !(*r <= MOMENT_TOL))
            .map(|(&i, _)| i)
            .collect();
        if failing.is_empty() {
            return Ok((layout, table, rows));
        }
        if round == MAX_ENRICHMENT {
            let (i, residual) = tests
                .iter()
                .zip(&rows)
                .find(|(_, (_, r))| !(*r <= MOMENT_TOL))
                .map(|(&i, (_, r))| (i, *r))
                .expect("non-empty failing set");
            return Err(Error::MomentFit { test: i, residual, tolerance: MOMENT_TOL });
        }
        let mut enrich: Vec<usize> = failing
            .iter()
            .map(|&i| {
                basis
                    .support_elements(i)
                    .min_by_key(|&e| layout.count(e))
                    .expect("non-empty support")
            })
            .collect();
        enrich.sort_unstable();
        enrich.dedup();
        log::debug!("enriching elements {enrich:?} after failed moment fit");
        for e in enrich {
            layout.split_largest_gap(e);
        }
    }
    unreachable!()
}

/// Weighted quadrature rules of one parametric direction: one weight row per
/// test function, zero outside its support.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRuleSet {
    layout: PointLayout,
    table: BasisTable,
    rows: Vec<WeightRow>,
    max_residual: f64,
}

impl WeightedRuleSet {
    /// Builds rules on `layout`, adding points if a moment system cannot
    /// be satisfied.
    pub fn build(basis: &Basis1D, layout: PointLayout, parallel: bool) -> Result<Self> {
        let tests: Vec<usize> = (0..basis.len()).collect();
        let (layout, table, fitted) = fit_with_enrichment(basis, layout, &tests, parallel)?;
        let max_residual = fitted.iter().fold(0.0f64, |m, (_, r)| m.max(*r));
        let rows = fitted.into_iter().map(|(r, _)| r).collect();
        Ok(WeightedRuleSet { layout, table, rows, max_residual })
    }

    /// Default layout followed by [`WeightedRuleSet::build`].
    pub fn for_basis(basis: &Basis1D, parallel: bool) -> Result<Self> {
        Self::build(basis, place_wq_points(basis), parallel)
    }

    pub fn layout(&self) -> &PointLayout {
        &self.layout
    }

    pub fn table(&self) -> &BasisTable {
        &self.table
    }

    pub fn row(&self, i: usize) -> &WeightRow {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[WeightRow] {
        &self.rows
    }

    /// Largest relative moment residual over all rows.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn dump(&self) -> RuleDump<'_> {
        RuleDump {
            points: self.layout.points(),
            rows: self.rows.iter().enumerate().map(|(i, r)| RowDump { test: i, row: r }).collect(),
        }
    }
}

/// JSON debug view of a rule set.
#[derive(Debug, Serialize)]
pub struct RuleDump<'a> {
    pub points: &'a [f64],
    pub rows: Vec<RowDump<'a>>,
}

#[derive(Debug, Serialize)]
pub struct RowDump<'a> {
    pub test: usize,
    #[serde(flatten)]
    pub row: &'a WeightRow,
}
