mod common;

use std::sync::Arc;

use common::{breaks, cox_de_boor, Oracle};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use trimquad::assembly::{assemble, CoefficientField, FormOptions, SparseMatrix, Strategy};
use trimquad::projection::{
    assemble_rhs, benchmark_target, conjugate_gradient, l2_error, project, run_convergence_study, solve_spd, ProjectionProblem,
    StudyOptions, Target, SOLVE_TOL,
};
use trimquad::splinecore::TensorBasis2D;
use trimquad::trimming::{case_domain, CaseName, TrimConfiguration};
use trimquad::Error;

const CASES: [CaseName; 3] = [CaseName::Line, CaseName::Circle, CaseName::Corner];
const EXACT: [Strategy; 3] = [Strategy::Reference, Strategy::Hybrid, Strategy::Dwq];

fn problem(case: CaseName, p: usize, n: usize, target: Target, s: Strategy) -> ProjectionProblem {
    let tb = TensorBasis2D::open_uniform(p, n).unwrap();
    ProjectionProblem::new(target, TrimConfiguration::new(&tb, &case_domain(case)).unwrap(), s)
}

/// 1-D L2 projection of `f` on `[0, b]` onto the functions that do not
/// vanish there. Returns the retained indices, coefficients, and the
/// squared norms of `f` and of its projection.
fn project_1d(knots: &[f64], p: usize, b: f64, f: &dyn Fn(f64) -> f64) -> (Vec<usize>, Vec<f64>, f64, f64) {
    let n = knots.len() - p - 1;
    let keep: Vec<usize> = (0..n).filter(|&i| knots[i] < b).collect();
    let mut br: Vec<f64> = breaks(knots).into_iter().filter(|&k| k < b).collect();
    br.push(b);
    let o = Oracle::new(14);
    let m = DMatrix::from_fn(keep.len(), keep.len(), |r, c| {
        o.piecewise(&br, &|x| cox_de_boor(knots, p, keep[r], x) * cox_de_boor(knots, p, keep[c], x))
    });
    let rhs = DVector::from_fn(keep.len(), |r, _| o.piecewise(&br, &|x| f(x) * cox_de_boor(knots, p, keep[r], x)));
    let c = m.clone().cholesky().unwrap().solve(&rhs);
    let proj = c.dot(&(&m * &c));
    let norm = o.piecewise(&br, &|x| f(x) * f(x));
    (keep, c.as_slice().to_vec(), norm, proj)
}

#[test]
fn line_case_projection_is_a_tensor_product_of_1d_projections() {
    // degree p + 1 per direction: outside the space, but integrated exactly
    // by the load and error rules, so the comparison is down to round-off
    for p in 1..=4 {
        let n = 5;
        let e = (p + 1) as i32;
        let target: Target = Arc::new(move |x| x[0].powi(e) * x[1].powi(e));
        let pr = problem(CaseName::Line, p, n, target, Strategy::Reference);
        let out = project(&pr, FormOptions::default()).unwrap();
        let k = pr.config.basis().dirs[0].knots().to_vec();
        let (kx, cx, nx, px) = project_1d(&k, p, 1.0, &|x| x.powi(e));
        let (ky, cy, ny, py) = project_1d(&k, p, 0.37, &|y| y.powi(e));
        let tb = pr.config.basis();
        for (r, &i) in pr.config.dofs().iter().enumerate() {
            let (i1, i2) = tb.unflat(i);
            let want = cx[kx.iter().position(|&v| v == i1).unwrap()] * cy[ky.iter().position(|&v| v == i2).unwrap()];
            assert!((out.coeffs[r] - want).abs() < 1e-11, "p={p} dof {r}: {} vs {want}", out.coeffs[r]);
        }
        // orthogonality: |f - Pf|^2 = |f|^2 - |Pf|^2
        let want = ((nx * ny - px * py) / (nx * ny)).sqrt();
        assert!((out.l2_rel - want).abs() < 1e-6 * want, "p={p}: {} vs {want}", out.l2_rel);
    }
}

#[test]
fn spline_targets_are_reproduced_on_cut_domains() {
    let mut rng = StdRng::seed_from_u64(5);
    for case in CASES {
        let p = 2;
        let tb = TensorBasis2D::open_uniform(p, 8).unwrap();
        let coeffs: Vec<f64> = (0..tb.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = tb.clone();
        let target: Target = Arc::new(move |x| b.eval_spline(&coeffs, x[0], x[1]).unwrap());
        for s in EXACT {
            let out = project(&problem(case, p, 8, target.clone(), s), FormOptions::default()).unwrap();
            // curved sub-cells make the cut-cell rules slightly inexact
            let tol = if case == CaseName::Line { 1e-13 } else { 1e-9 };
            assert!(out.l2_rel < tol, "{case:?} {s}: {:e}", out.l2_rel);
        }
    }
}

fn random_spd(rng: &mut StdRng, n: usize, band: usize) -> SparseMatrix {
    // B^T B + n I with a banded B keeps the pattern banded
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..(i + band / 2 + 1).min(n) {
            b[(i, j)] = rng.gen_range(-1.0..1.0);
        }
    }
    let a = b.transpose() * &b + DMatrix::identity(n, n) * 0.1;
    let (mut ptr, mut cols, mut vals) = (vec![0], Vec::new(), Vec::new());
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) <= band {
                cols.push(j);
                vals.push(a[(i, j)]);
            }
        }
        ptr.push(cols.len());
    }
    SparseMatrix::from_csr(ptr, cols, vals, (0..n).collect()).unwrap()
}

fn residual(m: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = m.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    r / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn random_spd_systems_are_solved_to_tolerance() {
    let mut rng = StdRng::seed_from_u64(99);
    for band in [2, 6, 49] {
        for _ in 0..10 {
            let m = random_spd(&mut rng, 50, band);
            let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = solve_spd(&m, &b).unwrap();
            let r = residual(&m, &s.x, &b);
            assert!(r <= SOLVE_TOL, "band {band}: {r:e}");
            assert!((s.relative_residual - r).abs() <= 1e-14);
            // the condition estimate is within a factor of the exact one
            let dense = DMatrix::from_fn(50, 50, |i, j| m.get(i, j));
            let d = dense.diagonal().map(|v| 1.0 / v.sqrt());
            let scaled = DMatrix::from_diagonal(&d) * dense * DMatrix::from_diagonal(&d);
            let ev = scaled.symmetric_eigenvalues();
            let exact = ev.max() / ev.min();
            assert!(s.condition > 0.5 * exact && s.condition < 2.0 * exact, "{} vs {exact}", s.condition);
        }
    }
}

#[test]
fn conjugate_gradient_agrees_with_cholesky_on_mass_matrices() {
    let pr = problem(CaseName::Circle, 3, 10, benchmark_target(), Strategy::Dwq);
    let m = assemble(Strategy::Dwq, &pr.config, &CoefficientField::identity(), FormOptions::default()).unwrap();
    let b = assemble_rhs(&pr).unwrap();
    let chol = solve_spd(&m, &b).unwrap();
    let scale: Vec<f64> = m.diagonal().iter().map(|d| 1.0 / d.sqrt()).collect();
    let cg = conjugate_gradient(&m, &b, &scale).unwrap();
    assert!(residual(&m, &cg.x, &b) <= SOLVE_TOL, "{:e}", residual(&m, &cg.x, &b));
    let n = m.dim();
    let dense = DMatrix::from_fn(n, n, |i, j| m.get(i, j) * scale[i] * scale[j]);
    let ev = dense.symmetric_eigenvalues();
    let exact = ev.max() / ev.min();
    for est in [cg.condition, chol.condition] {
        assert!(est > 0.5 * exact && est < 2.0 * exact, "{est} vs {exact}");
    }
    let diff = chol.x.iter().zip(&cg.x).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
    let size = chol.x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-9 * size);
}

#[test]
fn indefinite_and_mismatched_systems_are_rejected() {
    let m = SparseMatrix::from_csr(vec![0, 2, 4], vec![0, 1, 0, 1], vec![1.0, 2.0, 2.0, 1.0], vec![0, 1]).unwrap();
    assert!(matches!(solve_spd(&m, &[1.0, 0.0]), Err(Error::NotSpd { .. })));
    assert!(matches!(solve_spd(&m, &[1.0]), Err(Error::Dimension(_))));
    let pr = problem(CaseName::Line, 2, 4, benchmark_target(), Strategy::Reference);
    assert!(matches!(l2_error(&[1.0, 2.0], &pr), Err(Error::Dimension(_))));
}

#[test]
fn the_guard_names_small_supports() {
    let err = run_convergence_study(
        "circle",
        &case_domain(CaseName::Circle),
        benchmark_target(),
        &[Strategy::Reference],
        &[2],
        &[10],
        StudyOptions { guard: Some(1.0), ..StudyOptions::default() },
    )
    .unwrap_err();
    match err {
        Error::IllConditioned { dofs, limit, estimate } => {
            assert_eq!(dofs.len(), 5);
            assert!(estimate > limit);
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn fast_strategies_converge_like_the_reference() {
    for case in CASES {
        let recs = run_convergence_study(
            case.as_str(),
            &case_domain(case),
            benchmark_target(),
            &EXACT,
            &[2],
            &[10, 20],
            StudyOptions::default(),
        )
        .unwrap();
        for r in recs.iter().filter(|r| r.h < 0.07) {
            assert!(r.rate.unwrap() >= 2.8, "{case:?} {}: {:?}", r.strategy, r.rate);
            assert!(r.rel_diff_to_reference.unwrap() < 1e-9);
            assert!(r.condition < 1e12);
        }
    }
}

#[test]
fn parallel_projection_matches_serial() {
    let pr = problem(CaseName::Corner, 3, 12, benchmark_target(), Strategy::Dwq);
    let a = project(&pr, FormOptions::default()).unwrap();
    let b = project(&pr, FormOptions { parallel: true, symmetrize: true }).unwrap();
    assert!((a.l2_rel - b.l2_rel).abs() <= 1e-12 * a.l2_rel);
}
