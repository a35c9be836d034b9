use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{CoefficientField, Grid};
use super::sparse::SparseMatrix;
use super::sumfact::{sum_factor_row, Rule1D, Window};
use crate::error::{Error, Result};
use crate::quadrature::{build_dwq, BasisTable, DiscontinuousRuleSet, GaussRule, WeightedRuleSet};
use crate::splinecore::{Basis1D, TensorBasis2D};
use crate::trimming::{
    BasisClass, BoxSide, CutCellQuadrature, CutFunction, ElementClass, TrimConfiguration, MAX_CELL_DEGREE,
};

/// Mass-matrix formation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Element-wise Gauss on every valid element.
    Reference,
    /// Weighted quadrature everywhere, coefficients zeroed off the interior
    /// elements, plus cut-element quadrature.
    Wq,
    /// Weighted quadrature for interior functions, element-wise Gauss for
    /// cut functions.
    Hybrid,
    /// Like hybrid, but cut functions use discontinuous weighted quadrature
    /// on their regular support where possible.
    Dwq,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Reference, Strategy::Wq, Strategy::Hybrid, Strategy::Dwq];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Reference => "reference",
            Strategy::Wq => "wq",
            Strategy::Hybrid => "hybrid",
            Strategy::Dwq => "dwq",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?} (expected reference, wq, hybrid or dwq)")))
    }
}

/// Formation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormOptions {
    /// Form rows and build rules on the rayon pool.
    pub parallel: bool,
    /// Average with the transpose after row formation.
    pub symmetrize: bool,
}

impl Default for FormOptions {
    fn default() -> Self {
        FormOptions { parallel: false, symmetrize: true }
    }
}

/// Wall-clock seconds per formation component, and a few counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FormationReport {
    /// Weighted and discontinuous rule construction.
    pub t_weights: f64,
    /// Rows of interior functions (reference: interior elements).
    pub t_interior: f64,
    /// Regular support of cut functions.
    pub t_cut_regular: f64,
    /// Cut-element quadrature and its contributions.
    pub t_cut_elements: f64,
    pub t_total: f64,
    /// Weighted-quadrature points over both directions.
    pub wq_points: usize,
    /// Points of all discontinuous rule layouts.
    pub dwq_points: usize,
    pub dwq_rule_sets: usize,
    /// Cut functions that fell back to element-wise Gauss.
    pub dwq_fallbacks: usize,
    pub cut_points: usize,
    /// Multiply-adds spent in sum factorization.
    pub sum_factor_ops: usize,
}

/// Element-wise Gauss points of one direction.
struct ElementGauss {
    n: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    table: BasisTable,
}

impl ElementGauss {
    fn new(basis: &Basis1D, n: usize) -> Result<Self> {
        let rule = GaussRule::new(n)?;
        let mut points = Vec::with_capacity(basis.num_elements() * n);
        let mut weights = Vec::with_capacity(points.capacity());
        for el in basis.elements() {
            for (x, w) in rule.mapped(el.lo, el.hi) {
                points.push(x);
                weights.push(w);
            }
        }
        let table = BasisTable::new(basis, &points);
        Ok(ElementGauss { n, points, weights, table })
    }

    fn range(&self, e: usize) -> std::ops::Range<usize> {
        e * self.n..(e + 1) * self.n
    }
}

/// Basis values and weights at the points of one cut element.
struct CutEval {
    first: Vec<[usize; 2]>,
    values: [Vec<f64>; 2],
    weights: Vec<f64>,
}

fn cut_evals(basis: &TensorBasis2D, cq: &CutCellQuadrature, field: &CoefficientField) -> HashMap<(usize, usize), CutEval> {
    let p = [basis.dirs[0].degree(), basis.dirs[1].degree()];
    cq.rules()
        .iter()
        .map(|r| {
            let (e1, e2) = r.element;
            let mut ev = CutEval { first: Vec::new(), values: [Vec::new(), Vec::new()], weights: Vec::new() };
            for (x, &w) in r.points.iter().zip(&r.weights) {
                let mut first = [0; 2];
                for d in 0..2 {
                    let b = &basis.dirs[d];
                    let el = b.elements()[if d == 0 { e1 } else { e2 }];
                    let start = ev.values[d].len();
                    ev.values[d].resize(start + p[d] + 1, 0.0);
                    b.eval_span_into(el.span, x[d].clamp(el.lo, el.hi), &mut ev.values[d][start..]);
                    first[d] = el.span - p[d];
                }
                ev.first.push(first);
                ev.weights.push(w * field.eval(*x));
            }
            ((e1, e2), ev)
        })
        .collect()
}

fn window(basis: &Basis1D, i: usize) -> Window {
    let r = basis.overlapping(i);
    Window { first: *r.start(), len: r.end() - r.start() + 1 }
}

/// Shared inputs of row formation.
struct Ctx<'a> {
    basis: &'a TensorBasis2D,
    field: &'a CoefficientField,
    wq: Option<[WeightedRuleSet; 2]>,
    grid: Option<Grid>,
    dwq: HashMap<(usize, u64), DiscontinuousRuleSet>,
    gauss: Option<([ElementGauss; 2], Grid)>,
}

impl Ctx<'_> {
    fn windows(&self, i: usize) -> ([usize; 2], [Window; 2]) {
        let (i1, i2) = self.basis.unflat(i);
        ([i1, i2], [window(&self.basis.dirs[0], i1), window(&self.basis.dirs[1], i2)])
    }

    /// Weighted-quadrature row on the standard layouts, masked grid.
    fn wq_row(&self, i: usize, scratch: &mut Vec<f64>, block: &mut [f64]) -> usize {
        let ([i1, i2], [w1, w2]) = self.windows(i);
        let wq = self.wq.as_ref().expect("weighted rules built");
        let grid = self.grid.as_ref().expect("grid built");
        let (a, b) = (wq[0].row(i1), wq[1].row(i2));
        let r1 = Rule1D { table: wq[0].table(), start: a.start, weights: &a.weights };
        let r2 = Rule1D { table: wq[1].table(), start: b.start, weights: &b.weights };
        sum_factor_row(r1, r2, w1, w2, |x, y| grid.get(a.start + x, b.start + y), scratch, block)
    }

    /// Discontinuous weighted-quadrature row over the plan box.
    fn dwq_row(&self, f: &CutFunction, scratch: &mut Vec<f64>, block: &mut [f64]) -> usize {
        let plan = f.plan.as_ref().expect("eligible with a box");
        let i = [f.index.0, f.index.1];
        let wq = self.wq.as_ref().expect("weighted rules built");
        let mut rules = Vec::with_capacity(2);
        let mut points: Vec<&[f64]> = Vec::with_capacity(2);
        for d in 0..2 {
            match plan.sides[d] {
                BoxSide::Full => {
                    let row = wq[d].row(i[d]);
                    rules.push(Rule1D { table: wq[d].table(), start: row.start, weights: &row.weights });
                    points.push(wq[d].layout().points());
                }
                BoxSide::Split { u_disc, side } => {
                    let rs = &self.dwq[&(d, u_disc.to_bits())];
                    let (start, weights) = rs.one_sided(i[d], side).expect("support contains the discontinuity");
                    rules.push(Rule1D { table: rs.table(), start, weights });
                    points.push(rs.layout().points());
                }
            }
        }
        let w = [window(&self.basis.dirs[0], i[0]), window(&self.basis.dirs[1], i[1])];
        let (s1, s2) = (rules[0].start, rules[1].start);
        let (p1, p2) = (points[0], points[1]);
        let field = self.field;
        sum_factor_row(rules[0], rules[1], w[0], w[1], |a, b| field.eval([p1[s1 + a], p2[s2 + b]]), scratch, block)
    }

    /// Element-wise Gauss contributions of test `i` on `elements`.
    fn gauss_row(&self, i: usize, elements: &[(usize, usize)], block: &mut [f64]) {
        let ([i1, i2], [w1, w2]) = self.windows(i);
        let (g, grid) = self.gauss.as_ref().expect("gauss tables built");
        for &(e1, e2) in elements {
            for k1 in g[0].range(e1) {
                let (f1, v1) = g[0].table.at(k1);
                let b1 = g[0].weights[k1] * v1[i1 - f1];
                for k2 in g[1].range(e2) {
                    let (f2, v2) = g[1].table.at(k2);
                    let wb = b1 * g[1].weights[k2] * v2[i2 - f2] * grid.get(k1, k2);
                    accumulate(wb, f1, v1, f2, v2, w1, w2, block);
                }
            }
        }
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn accumulate(wb: f64, f1: usize, v1: &[f64], f2: usize, v2: &[f64], w1: Window, w2: Window, block: &mut [f64]) {
    if wb == 0.0 {
        return;
    }
    for (a1, x1) in v1.iter().enumerate() {
        let s = wb * x1;
        let row = (f1 + a1 - w1.first) * w2.len + f2 - w2.first;
        for (o, x2) in block[row..row + v2.len()].iter_mut().zip(v2) {
            *o += s * x2;
        }
    }
}

/// Copies the block entries of the stored columns into a matrix row.
fn scatter(basis: &TensorBasis2D, dofs: &[usize], cols: &[usize], w: [Window; 2], block: &[f64], out: &mut [f64]) {
    for (&c, o) in cols.iter().zip(out.iter_mut()) {
        let (j1, j2) = basis.unflat(dofs[c]);
        *o = block[(j1 - w[0].first) * w[1].len + (j2 - w[1].first)];
    }
}

/// Adds the outer product of the tensor values at one point to the upper
/// triangle of a local matrix.
fn add_point(local: &mut [f64], phi: &mut [f64], wc: f64, v1: &[f64], v2: &[f64]) {
    let nl = phi.len();
    for (a1, x1) in v1.iter().enumerate() {
        for (a2, x2) in v2.iter().enumerate() {
            phi[a1 * v2.len() + a2] = x1 * x2;
        }
    }
    for a in 0..nl {
        let s = wc * phi[a];
        for b in a..nl {
            local[a * nl + b] += s * phi[b];
        }
    }
}

fn mirror(local: &mut [f64], nl: usize) {
    for a in 0..nl {
        for b in 0..a {
            local[a * nl + b] = local[b * nl + a];
        }
    }
}

/// Adds a local matrix over the functions active on an element, `first`
/// being the lowest active index per direction.
fn scatter_local(config: &TrimConfiguration, m: &mut SparseMatrix, first: [usize; 2], local: &[f64]) {
    let basis = config.basis();
    let n2 = basis.shape().1;
    let q2 = basis.dirs[1].degree() + 1;
    let nl = (basis.dirs[0].degree() + 1) * q2;
    let dof: Vec<usize> = (0..nl)
        .map(|a| config.dof_of((first[0] + a / q2) * n2 + first[1] + a % q2).expect("active on a valid element"))
        .collect();
    for a in 0..nl {
        for b in 0..nl {
            let k = m.position(dof[a], dof[b]).expect("overlapping functions are stored");
            m.add_at(k, local[a * nl + b]);
        }
    }
}

/// Element-wise cut-cell contributions of every cut element. Returns the
/// number of quadrature points.
fn add_cut_elements(
    config: &TrimConfiguration,
    field: &CoefficientField,
    parallel: bool,
    matrix: &mut SparseMatrix,
) -> Result<usize> {
    let cut = config.cut_elements();
    if cut.is_empty() {
        return Ok(0);
    }
    let basis = config.basis();
    let p = [basis.dirs[0].degree(), basis.dirs[1].degree()];
    let nl = (p[0] + 1) * (p[1] + 1);
    let pmax = p[0].max(p[1]);
    let cq = CutCellQuadrature::with_points(config, cut_degree(pmax), cut_points(pmax), parallel)?;
    let evals = cut_evals(basis, &cq, field);
    let local_of = |e: &(usize, usize)| {
        let ev = &evals[e];
        let mut local = vec![0.0; nl * nl];
        let mut phi = vec![0.0; nl];
        for (k, w) in ev.weights.iter().enumerate() {
            let v1 = &ev.values[0][k * (p[0] + 1)..(k + 1) * (p[0] + 1)];
            let v2 = &ev.values[1][k * (p[1] + 1)..(k + 1) * (p[1] + 1)];
            add_point(&mut local, &mut phi, *w, v1, v2);
        }
        mirror(&mut local, nl);
        local
    };
    let locals: Vec<Vec<f64>> = if parallel { cut.par_iter().map(local_of).collect() } else { cut.iter().map(local_of).collect() };
    for (e, local) in cut.iter().zip(&locals) {
        let first = [basis.dirs[0].first_active(e.0), basis.dirs[1].first_active(e.1)];
        scatter_local(config, matrix, first, local);
    }
    Ok(cq.num_points())
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Degree of the curved sub-cell edges for spline degree `p`.
pub fn cut_degree(p: usize) -> usize {
    p.clamp(1, MAX_CELL_DEGREE)
}

/// Gauss points per direction and sub-cell for spline degree `p`.
///
/// Pulled back through a non-affine sub-cell map, a product of two degree-`p`
/// splines has degree about `4p` per reference direction, so `p + 1` points
/// leave an error that does not shrink under refinement. `3p + 1` points
/// reproduce splines to roundoff on all canonical cases.
pub fn cut_points(p: usize) -> usize {
    3 * p.max(1) + 1
}

/// Forms the mass matrix with one strategy and reports per-component
/// wall-clock times.
pub fn form_with_timings(
    strategy: Strategy,
    config: &TrimConfiguration,
    field: &CoefficientField,
    options: FormOptions,
) -> Result<(SparseMatrix, FormationReport)> {
    if strategy == Strategy::Reference {
        return form_reference(config, field, options);
    }
    let t_start = Instant::now();
    let basis = config.basis();
    let parallel = options.parallel;
    let mut report = FormationReport::default();
    let p = basis.dirs[0].degree().max(basis.dirs[1].degree());

    // (i) quadrature weights
    let t = Instant::now();
    let wq = [
        WeightedRuleSet::for_basis(&basis.dirs[0], parallel)?,
        WeightedRuleSet::for_basis(&basis.dirs[1], parallel)?,
    ];
    let mut dwq = HashMap::new();
    if strategy == Strategy::Dwq {
        let jobs: Vec<(usize, f64)> =
            (0..2).flat_map(|d| config.u_disc(d).iter().map(move |&u| (d, u))).collect();
        let build = |&(d, u): &(usize, f64)| {
            build_dwq(&basis.dirs[d], wq[d].layout(), u, parallel).map(|r| ((d, u.to_bits()), r))
        };
        let built: Vec<_> = if parallel {
            jobs.par_iter().map(build).collect::<Result<_>>()?
        } else {
            jobs.iter().map(build).collect::<Result<_>>()?
        };
        dwq.extend(built);
    }
    report.t_weights = secs(t);
    report.wq_points = wq[0].layout().len() + wq[1].layout().len();
    report.dwq_rule_sets = dwq.len();
    report.dwq_points = dwq.values().map(|r: &DiscontinuousRuleSet| r.layout().len()).sum();

    let mut ctx = Ctx { basis, field, wq: Some(wq), grid: None, dwq, gauss: None };
    let mut matrix = SparseMatrix::pattern(config);
    let dofs = config.dofs().to_vec();
    let mut rows = matrix.rows_mut();
    let (mut cut_rows, mut interior_rows): (Vec<_>, Vec<_>) =
        rows.drain(..).partition(|(r, _, _)| config.basis_class(dofs[*r]) == BasisClass::Cut);

    // (ii) interior functions
    let t = Instant::now();
    {
        let wq = ctx.wq.as_ref().expect("built above");
        let (pts1, pts2) = (wq[0].layout().points(), wq[1].layout().points());
        let mut grid = field.grid(pts1, pts2);
        if config.domain().curve().is_some() {
            let els: Vec<Vec<usize>> =
                wq.iter().map(|w| (0..w.layout().len()).map(|k| w.layout().element_of_point(k)).collect()).collect();
            for (k1, &e1) in els[0].iter().enumerate() {
                for (k2, &e2) in els[1].iter().enumerate() {
                    if config.element_class(e1, e2) != ElementClass::Interior {
                        grid.set(k1, k2, 0.0);
                    }
                }
            }
        }
        ctx.grid = Some(grid);
    }
    let interior_row = |(r, cols, out): &mut (usize, &[usize], &mut [f64]), scratch: &mut Vec<f64>| -> usize {
        let i = dofs[*r];
        let (_, w) = ctx.windows(i);
        let mut block = vec![0.0; w[0].len * w[1].len];
        let ops = ctx.wq_row(i, scratch, &mut block);
        scatter(basis, &dofs, cols, w, &block, out);
        ops
    };
    report.sum_factor_ops += if parallel {
        interior_rows.par_iter_mut().map_init(Vec::new, |s, row| interior_row(row, s)).sum::<usize>()
    } else {
        let mut s = Vec::new();
        interior_rows.iter_mut().map(|row| interior_row(row, &mut s)).sum()
    };
    report.t_interior = secs(t);

    // (iii) regular support of cut functions
    let t = Instant::now();
    if strategy != Strategy::Wq {
        let n = p + 1;
        let g = [ElementGauss::new(&basis.dirs[0], n)?, ElementGauss::new(&basis.dirs[1], n)?];
        let grid = field.grid(&g[0].points, &g[1].points);
        ctx.gauss = Some((g, grid));
    }
    let mut blocks: Vec<Vec<f64>> = cut_rows
        .iter()
        .map(|(r, _, _)| {
            let (_, w) = ctx.windows(dofs[*r]);
            vec![0.0; w[0].len * w[1].len]
        })
        .collect();
    let regular = |r: usize, block: &mut Vec<f64>, scratch: &mut Vec<f64>| -> (usize, usize) {
        let i = dofs[r];
        let f = config.cut_function(i).expect("cut row");
        match strategy {
            Strategy::Wq => (ctx.wq_row(i, scratch, block), 0),
            Strategy::Hybrid => {
                ctx.gauss_row(i, &f.regular, block);
                (0, 0)
            }
            _ => match &f.plan {
                Some(plan) => {
                    let ops = ctx.dwq_row(f, scratch, block);
                    ctx.gauss_row(i, &plan.rest, block);
                    (ops, 0)
                }
                None if f.eligible => (0, 0),
                None => {
                    ctx.gauss_row(i, &f.regular, block);
                    (0, 1)
                }
            },
        }
    };
    let (ops, fallbacks) = if parallel {
        cut_rows
            .par_iter()
            .zip(blocks.par_iter_mut())
            .map_init(Vec::new, |s, ((r, _, _), b)| regular(*r, b, s))
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    } else {
        let mut s = Vec::new();
        cut_rows.iter().zip(blocks.iter_mut()).fold((0, 0), |acc, ((r, _, _), b)| {
            let x = regular(*r, b, &mut s);
            (acc.0 + x.0, acc.1 + x.1)
        })
    };
    for ((r, cols, out), block) in cut_rows.iter_mut().zip(&blocks) {
        let (_, w) = ctx.windows(dofs[*r]);
        scatter(basis, &dofs, cols, w, block, out);
    }
    report.sum_factor_ops += ops;
    report.dwq_fallbacks = fallbacks;
    report.t_cut_regular = secs(t);
    drop(cut_rows);
    drop(interior_rows);

    // (iv) cut elements
    let t = Instant::now();
    report.cut_points = add_cut_elements(config, field, parallel, &mut matrix)?;
    report.t_cut_elements = secs(t);

    if options.symmetrize {
        matrix.symmetrize();
    }
    report.t_total = secs(t_start);
    Ok((matrix, report))
}

/// Element-wise Gauss assembly on interior elements and cut-element
/// quadrature on cut elements.
fn form_reference(
    config: &TrimConfiguration,
    field: &CoefficientField,
    options: FormOptions,
) -> Result<(SparseMatrix, FormationReport)> {
    let t_start = Instant::now();
    let basis = config.basis();
    let (ne1, ne2) = basis.element_shape();
    let p = [basis.dirs[0].degree(), basis.dirs[1].degree()];
    let nl = (p[0] + 1) * (p[1] + 1);
    let mut report = FormationReport::default();
    let mut matrix = SparseMatrix::pattern(config);

    // interior elements
    let t = Instant::now();
    let g = [ElementGauss::new(&basis.dirs[0], p[0] + 1)?, ElementGauss::new(&basis.dirs[1], p[1] + 1)?];
    let grid = field.grid(&g[0].points, &g[1].points);
    let mut local = vec![0.0; nl * nl];
    let mut phi = vec![0.0; nl];
    for e1 in 0..ne1 {
        for e2 in 0..ne2 {
            if config.element_class(e1, e2) != ElementClass::Interior {
                continue;
            }
            local.iter_mut().for_each(|x| *x = 0.0);
            let mut first = (0, 0);
            for k1 in g[0].range(e1) {
                let (f1, v1) = g[0].table.at(k1);
                for k2 in g[1].range(e2) {
                    let (f2, v2) = g[1].table.at(k2);
                    let wc = g[0].weights[k1] * g[1].weights[k2] * grid.get(k1, k2);
                    add_point(&mut local, &mut phi, wc, v1, v2);
                    first = (f1, f2);
                }
            }
            mirror(&mut local, nl);
            scatter_local(config, &mut matrix, [first.0, first.1], &local);
        }
    }
    report.t_interior = secs(t);

    // cut elements
    let t = Instant::now();
    report.cut_points = add_cut_elements(config, field, options.parallel, &mut matrix)?;
    report.t_cut_elements = secs(t);
    if options.symmetrize {
        matrix.symmetrize();
    }
    report.t_total = secs(t_start);
    Ok((matrix, report))
}

/// Forms the mass matrix with one strategy.
pub fn assemble(
    strategy: Strategy,
    config: &TrimConfiguration,
    field: &CoefficientField,
    options: FormOptions,
) -> Result<SparseMatrix> {
    form_with_timings(strategy, config, field, options).map(|(m, _)| m)
}

/// Element-wise Gauss reference matrix.
pub fn assemble_gauss_reference(config: &TrimConfiguration, field: &CoefficientField) -> Result<SparseMatrix> {
    assemble(Strategy::Reference, config, field, FormOptions::default())
}

/// Naive weighted quadrature.
pub fn assemble_wq(config: &TrimConfiguration, field: &CoefficientField) -> Result<SparseMatrix> {
    assemble(Strategy::Wq, config, field, FormOptions::default())
}

/// Hybrid Gauss.
pub fn assemble_hybrid(config: &TrimConfiguration, field: &CoefficientField) -> Result<SparseMatrix> {
    assemble(Strategy::Hybrid, config, field, FormOptions::default())
}

/// Discontinuous weighted quadrature.
pub fn assemble_dwq(config: &TrimConfiguration, field: &CoefficientField) -> Result<SparseMatrix> {
    assemble(Strategy::Dwq, config, field, FormOptions::default())
}
