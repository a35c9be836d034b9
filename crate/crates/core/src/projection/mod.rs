//! L² projection onto trimmed spline spaces and error measurement.

mod solve;

pub use solve::{conjugate_gradient, solve_spd, BandCholesky, SolveMethod, SpdSolution, CONDITION_WARN, SOLVE_TOL};

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{cut_degree, cut_points, form_with_timings, CoefficientField, FormOptions, FormationReport, Strategy};
use crate::error::{Error, Result};
use crate::quadrature::GaussRule;
use crate::splinecore::TensorBasis2D;
use crate::trimming::{CutCellQuadrature, ElementClass, Point, TrimConfiguration, TrimmedDomain};

/// Condition estimate above which a convergence run is aborted.
pub const CONDITION_GUARD: f64 = 1e12;

/// Scalar function of the parameter point.
pub type Target = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// `sin(2x) cos(3y)`.
pub fn benchmark_target() -> Target {
    Arc::new(|x: Point| (2.0 * x[0]).sin() * (3.0 * x[1]).cos())
}

/// Everything needed to project one function onto one trimmed space.
#[derive(Clone)]
pub struct ProjectionProblem {
    pub target: Target,
    pub config: TrimConfiguration,
    pub field: CoefficientField,
    pub strategy: Strategy,
}

impl ProjectionProblem {
    pub fn new(target: Target, config: TrimConfiguration, strategy: Strategy) -> Self {
        ProjectionProblem { target, config, field: CoefficientField::identity(), strategy }
    }

    fn degree(&self) -> usize {
        let b = self.config.basis();
        b.dirs[0].degree().max(b.dirs[1].degree())
    }
}

/// Points and weights covering the valid part of one element.
struct ElementRule {
    element: (usize, usize),
    points: Vec<Point>,
    weights: Vec<f64>,
}

/// Tensor Gauss with `n` points per direction on interior elements, cut-cell
/// quadrature with `n_cut^2` points per sub-cell on cut elements.
fn domain_rules(config: &TrimConfiguration, n: usize, n_cut: usize, parallel: bool) -> Result<Vec<ElementRule>> {
    let basis = config.basis();
    let gauss = GaussRule::new(n)?;
    let (n1, n2) = basis.element_shape();
    let mut rules = Vec::new();
    for e1 in 0..n1 {
        for e2 in 0..n2 {
            if config.element_class(e1, e2) != ElementClass::Interior {
                continue;
            }
            let a = basis.dirs[0].elements()[e1];
            let b = basis.dirs[1].elements()[e2];
            let g2: Vec<(f64, f64)> = gauss.mapped(b.lo, b.hi).collect();
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (x1, w1) in gauss.mapped(a.lo, a.hi) {
                for &(x2, w2) in &g2 {
                    points.push([x1, x2]);
                    weights.push(w1 * w2);
                }
            }
            rules.push(ElementRule { element: (e1, e2), points, weights });
        }
    }
    if config.domain().curve().is_some() {
        let p = basis.dirs[0].degree().max(basis.dirs[1].degree());
        let cq = CutCellQuadrature::with_points(config, cut_degree(p), n_cut, parallel)?;
        rules.extend(cq.rules().iter().map(|r| ElementRule {
            element: r.element,
            points: r.points.clone(),
            weights: r.weights.clone(),
        }));
    }
    Ok(rules)
}

/// Non-zero basis values of element `(e1, e2)` at `x`, as `(dof, value)`
/// pairs over retained functions.
fn element_values(config: &TrimConfiguration, element: (usize, usize), x: Point, out: &mut Vec<(usize, f64)>) {
    let basis: &TensorBasis2D = config.basis();
    let mut vals = [Vec::new(), Vec::new()];
    let mut first = [0; 2];
    for d in 0..2 {
        let b = &basis.dirs[d];
        let el = b.elements()[if d == 0 { element.0 } else { element.1 }];
        vals[d].resize(b.degree() + 1, 0.0);
        b.eval_span_into(el.span, x[d].clamp(el.lo, el.hi), &mut vals[d]);
        first[d] = el.span - b.degree();
    }
    out.clear();
    for (a, v1) in vals[0].iter().enumerate() {
        for (b, v2) in vals[1].iter().enumerate() {
            if let Some(dof) = config.dof_of(basis.flat(first[0] + a, first[1] + b)) {
                out.push((dof, v1 * v2));
            }
        }
    }
}

fn rhs_from_rules(problem: &ProjectionProblem, rules: &[ElementRule], parallel: bool) -> Vec<f64> {
    let n = problem.config.num_dofs();
    let local = |r: &ElementRule| {
        let mut acc = Vec::new();
        let mut vals = Vec::new();
        for (x, w) in r.points.iter().zip(&r.weights) {
            let fw = (problem.target)(*x) * problem.field.eval(*x) * w;
            element_values(&problem.config, r.element, *x, &mut vals);
            acc.extend(vals.iter().map(|&(dof, v)| (dof, v * fw)));
        }
        acc
    };
    let parts: Vec<Vec<(usize, f64)>> =
        if parallel { rules.par_iter().map(local).collect() } else { rules.iter().map(local).collect() };
    let mut b = vec![0.0; n];
    for part in parts {
        for (dof, v) in part {
            b[dof] += v;
        }
    }
    b
}

/// Load vector `b_i = ∫ f B_i c` over the valid domain with `(p + 2)`-point
/// rules.
pub fn assemble_rhs(problem: &ProjectionProblem) -> Result<Vec<f64>> {
    let rules = domain_rules(&problem.config, problem.degree() + 2, cut_points(problem.degree()) + 1, false)?;
    Ok(rhs_from_rules(problem, &rules, false))
}

fn error_from_rules(coeffs: &[f64], problem: &ProjectionProblem, rules: &[ElementRule]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    let mut vals = Vec::new();
    for r in rules {
        for (x, w) in r.points.iter().zip(&r.weights) {
            element_values(&problem.config, r.element, *x, &mut vals);
            let uh: f64 = vals.iter().map(|&(dof, v)| coeffs[dof] * v).sum();
            let f = (problem.target)(*x);
            num += (uh - f) * (uh - f) * w;
            den += f * f * w;
        }
    }
    if den <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((num.max(0.0) / den).sqrt())
}

/// Relative L² error of the spline with retained coefficients `coeffs`,
/// measured with `(p + 3)`-point rules.
pub fn l2_error(coeffs: &[f64], problem: &ProjectionProblem) -> Result<f64> {
    if coeffs.len() != problem.config.num_dofs() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} retained functions",
            coeffs.len(),
            problem.config.num_dofs()
        )));
    }
    let rules = domain_rules(&problem.config, problem.degree() + 3, cut_points(problem.degree()) + 2, false)?;
    error_from_rules(coeffs, problem, &rules)
}

/// Outcome of one projection.
#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    pub coeffs: Vec<f64>,
    pub l2_rel: f64,
    pub solve: SpdSolution,
    pub report: FormationReport,
}

/// Retained dofs with the smallest mass-matrix diagonals.
fn smallest_supports(diag: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..diag.len()).collect();
    idx.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    idx.truncate(count);
    idx
}

/// Load vector and error rules shared by all strategies on one space.
struct Setup {
    rhs: Vec<f64>,
    error_rules: Vec<ElementRule>,
}

impl Setup {
    fn new(problem: &ProjectionProblem, parallel: bool) -> Result<Self> {
        let p = problem.degree();
        let rhs_rules = domain_rules(&problem.config, p + 2, cut_points(p) + 1, parallel)?;
        let rhs = rhs_from_rules(problem, &rhs_rules, parallel);
        let error_rules = domain_rules(&problem.config, p + 3, cut_points(p) + 2, parallel)?;
        Ok(Setup { rhs, error_rules })
    }

    fn project(&self, problem: &ProjectionProblem, options: FormOptions, guard: Option<f64>) -> Result<Projection> {
        let (m, report) = form_with_timings(problem.strategy, &problem.config, &problem.field, options)?;
        let solve = solve_spd(&m, &self.rhs)?;
        if let Some(limit) = guard {
            if solve.condition > limit {
                let dofs = smallest_supports(&m.diagonal(), 5).into_iter().map(|k| m.dofs()[k]).collect();
                return Err(Error::IllConditioned { estimate: solve.condition, limit, dofs });
            }
        }
        let l2_rel = error_from_rules(&solve.x, problem, &self.error_rules)?;
        Ok(Projection { coeffs: solve.x.clone(), l2_rel, solve, report })
    }
}

/// Forms the mass matrix, solves against the load vector and measures the
/// error.
pub fn project(problem: &ProjectionProblem, options: FormOptions) -> Result<Projection> {
    Setup::new(problem, options.parallel)?.project(problem, options, None)
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub case: String,
    pub strategy: Strategy,
    pub p: usize,
    pub h: f64,
    pub dofs: usize,
    pub l2_rel: f64,
    /// Observed order against the previous mesh of the same degree.
    pub rate: Option<f64>,
    /// `|e - e_ref| / e_ref` against the reference strategy.
    pub rel_diff_to_reference: Option<f64>,
    pub condition: f64,
}

impl ConvergenceRecord {
    pub const CSV_HEADER: &'static str = "case,strategy,p,h,dofs,l2_rel,rate,rel_diff_to_reference,condition";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        format!(
            "{},{},{},{:.6e},{},{:.6e},{},{},{:.3e}",
            self.case,
            self.strategy,
            self.p,
            self.h,
            self.dofs,
            self.l2_rel,
            opt(self.rate),
            opt(self.rel_diff_to_reference),
            self.condition
        )
    }
}

/// Settings of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    pub form: FormOptions,
    /// Abort on a condition estimate above this value.
    pub guard: Option<f64>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions { form: FormOptions::default(), guard: Some(CONDITION_GUARD) }
    }
}

/// Projects `target` for every degree, mesh and strategy. Meshes are element
/// counts per side on the unit square. The reference strategy always runs so
/// that every record carries its deviation from it.
pub fn run_convergence_study(
    case: &str,
    domain: &TrimmedDomain,
    target: Target,
    strategies: &[Strategy],
    degrees: &[usize],
    meshes: &[usize],
    options: StudyOptions,
) -> Result<Vec<ConvergenceRecord>> {
    let mut records = Vec::new();
    for &p in degrees {
        let mut previous: Vec<Option<(f64, f64)>> = vec![None; strategies.len()];
        for &n in meshes {
            let basis = TensorBasis2D::open_uniform(p, n)?;
            let config = TrimConfiguration::new(&basis, domain)?;
            let h = 1.0 / n as f64;
            let mut problem = ProjectionProblem::new(target.clone(), config, Strategy::Reference);
            let setup = Setup::new(&problem, options.form.parallel)?;
            let reference = setup.project(&problem, options.form, options.guard)?;
            for (k, &strategy) in strategies.iter().enumerate() {
                let result = if strategy == Strategy::Reference {
                    reference.clone()
                } else {
                    problem.strategy = strategy;
                    setup.project(&problem, options.form, options.guard)?
                };
                let e = result.l2_rel;
                let rate = previous[k].map(|(eh, hh)| (eh / e).ln() / (hh / h).ln());
                previous[k] = Some((e, h));
                log::info!("{case} {strategy} p={p} n={n}: error {e:.3e}");
                records.push(ConvergenceRecord {
                    case: case.to_string(),
                    strategy,
                    p,
                    h,
                    dofs: problem.config.num_dofs(),
                    l2_rel: e,
                    rate,
                    rel_diff_to_reference: Some((e - reference.l2_rel).abs() / reference.l2_rel),
                    condition: result.solve.condition,
                });
            }
        }
    }
    Ok(records)
}
