mod common;

use common::{breaks, cox_de_boor, rel_frobenius, Oracle};
use trimquad::assembly::{
    assemble, form_with_timings, sum_factor_row, sum_factor_row_reversed, CoefficientField, FormOptions, Rule1D,
    SparseMatrix, Strategy, Window,
};
use trimquad::quadrature::WeightedRuleSet;
use trimquad::splinecore::TensorBasis2D;
use trimquad::trimming::{case_domain, CaseName, TrimConfiguration, TrimmedDomain};

const CASES: [CaseName; 3] = [CaseName::Line, CaseName::Circle, CaseName::Corner];
const FAST: [Strategy; 3] = [Strategy::Wq, Strategy::Hybrid, Strategy::Dwq];

/// 1-D mass matrix of `knots` on `[a, b]` with weight `g`, by Gauss on the
/// pieces between knots and the interval ends.
fn mass_1d(knots: &[f64], p: usize, a: f64, b: f64, g: &dyn Fn(f64) -> f64) -> Vec<Vec<f64>> {
    let n = knots.len() - p - 1;
    let mut br: Vec<f64> = breaks(knots).into_iter().filter(|&k| k > a && k < b).collect();
    br.insert(0, a);
    br.push(b);
    let o = Oracle::new(12);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| o.piecewise(&br, &|x| g(x) * cox_de_boor(knots, p, i, x) * cox_de_boor(knots, p, j, x)))
                .collect()
        })
        .collect()
}

/// Dense separable oracle `sum_k A_k (x) B_k` restricted to the dofs.
fn separable(config: &TrimConfiguration, terms: &[(Vec<Vec<f64>>, Vec<Vec<f64>>)]) -> Vec<Vec<f64>> {
    let tb = config.basis();
    let dofs = config.dofs();
    dofs.iter()
        .map(|&i| {
            let (i1, i2) = tb.unflat(i);
            dofs.iter()
                .map(|&j| {
                    let (j1, j2) = tb.unflat(j);
                    terms.iter().map(|(a, b)| a[i1][j1] * b[i2][j2]).sum()
                })
                .collect()
        })
        .collect()
}

fn config(case: Option<CaseName>, p: usize, n: usize) -> TrimConfiguration {
    let tb = TensorBasis2D::open_uniform(p, n).unwrap();
    let domain = case.map_or_else(TrimmedDomain::untrimmed, case_domain);
    TrimConfiguration::new(&tb, &domain).unwrap()
}

fn form(s: Strategy, c: &TrimConfiguration) -> SparseMatrix {
    assemble(s, c, &CoefficientField::identity(), FormOptions::default()).unwrap()
}

#[test]
fn untrimmed_matrices_are_kronecker_products() {
    for p in 1..=6 {
        let c = config(None, p, 6);
        let k = c.basis().dirs[0].knots().to_vec();
        let m1 = mass_1d(&k, p, 0.0, 1.0, &|_| 1.0);
        let want = separable(&c, &[(m1.clone(), m1)]);
        for s in Strategy::ALL {
            let d = rel_frobenius(&form(s, &c).to_dense(), &want);
            assert!(d < 1e-13, "p={p} {s}: {d:e}");
        }
    }
}

#[test]
fn line_case_reference_matches_separable_oracle() {
    for p in 1..=6 {
        let c = config(Some(CaseName::Line), p, 10);
        let k = c.basis().dirs[0].knots().to_vec();
        let mx = mass_1d(&k, p, 0.0, 1.0, &|_| 1.0);
        let my = mass_1d(&k, p, 0.0, 0.37, &|_| 1.0);
        let want = separable(&c, &[(mx, my)]);
        for s in [Strategy::Reference, Strategy::Hybrid, Strategy::Dwq] {
            let d = rel_frobenius(&form(s, &c).to_dense(), &want);
            assert!(d < 1e-13, "p={p} {s}: {d:e}");
        }
    }
}

#[test]
fn variable_coefficient_reference_is_exact() {
    // c = 1 + x y is bilinear, so the reference Gauss rule stays exact
    let field = CoefficientField::function(|x| 1.0 + x[0] * x[1]);
    for p in [1, 3] {
        let c = config(Some(CaseName::Line), p, 8);
        let k = c.basis().dirs[0].knots().to_vec();
        let one = |_: f64| 1.0;
        let id = |x: f64| x;
        let want = separable(
            &c,
            &[
                (mass_1d(&k, p, 0.0, 1.0, &one), mass_1d(&k, p, 0.0, 0.37, &one)),
                (mass_1d(&k, p, 0.0, 1.0, &id), mass_1d(&k, p, 0.0, 0.37, &id)),
            ],
        );
        let m = assemble(Strategy::Reference, &c, &field, FormOptions::default()).unwrap();
        assert!(rel_frobenius(&m.to_dense(), &want) < 1e-13);
        // weighted rules are exact for the products only, so they approach
        // the reference as the mesh is refined
        for s in [Strategy::Hybrid, Strategy::Dwq] {
            let coarse = assemble(s, &c, &field, FormOptions::default()).unwrap();
            let fine_c = config(Some(CaseName::Line), p, 16);
            let fine = assemble(s, &fine_c, &field, FormOptions::default()).unwrap();
            let fine_ref = assemble(Strategy::Reference, &fine_c, &field, FormOptions::default()).unwrap();
            let e0 = coarse.deviation(&m).unwrap() / m.frobenius();
            let e1 = fine.deviation(&fine_ref).unwrap() / fine_ref.frobenius();
            assert!(e1 < e0 && e0 < 1e-2, "p={p} {s}: {e0:e} -> {e1:e}");
        }
    }
}

#[test]
fn row_sums_integrate_each_function_over_the_valid_domain() {
    for case in CASES {
        for p in [2, 4] {
            let c = config(Some(case), p, 10);
            let reference = form(Strategy::Reference, &c);
            let domain_area: f64 = reference.values().iter().sum();
            for s in [Strategy::Hybrid, Strategy::Dwq] {
                let m = form(s, &c);
                let ones = vec![1.0; m.dim()];
                let (a, b) = (m.mul_vec(&ones), reference.mul_vec(&ones));
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() <= 1e-13, "{case:?} p={p} {s}");
                }
            }
            if case == CaseName::Line {
                assert!((domain_area - 0.37).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn patterns_agree_and_matrices_are_symmetric() {
    for case in CASES {
        for p in 1..=4 {
            let c = config(Some(case), p, 10);
            let reference = form(Strategy::Reference, &c);
            for s in FAST {
                let m = form(s, &c);
                assert!(m.same_pattern(&reference), "{case:?} p={p} {s}");
                assert!(m.is_structurally_symmetric());
                assert!(m.max_asymmetry() <= 1e-12 * m.frobenius());
                assert_eq!(m.dofs(), c.dofs());
            }
        }
    }
}

#[test]
fn unsymmetrized_rows_are_already_symmetric_for_exact_rules() {
    let c = config(Some(CaseName::Circle), 3, 10);
    let opts = FormOptions { parallel: false, symmetrize: false };
    for s in [Strategy::Hybrid, Strategy::Dwq] {
        let m = assemble(s, &c, &CoefficientField::identity(), opts).unwrap();
        assert!(!m.is_symmetrized());
        assert!(m.max_asymmetry() <= 1e-13 * m.frobenius(), "{s}: {:e}", m.max_asymmetry());
    }
}

#[test]
fn parallel_formation_matches_serial() {
    let c = config(Some(CaseName::Corner), 3, 12);
    for s in Strategy::ALL {
        let serial = form(s, &c);
        let par = assemble(s, &c, &CoefficientField::identity(), FormOptions { parallel: true, symmetrize: true }).unwrap();
        assert!(par.deviation(&serial).unwrap() <= 1e-15 * serial.frobenius(), "{s}");
    }
}

#[test]
fn naive_wq_is_wrong_only_near_the_cut() {
    let c = config(Some(CaseName::Line), 3, 10);
    let reference = form(Strategy::Reference, &c);
    let wq = form(Strategy::Wq, &c);
    let rel = wq.deviation(&reference).unwrap() / reference.frobenius();
    assert!(rel > 1e-6, "{rel:e}");
    // rows of functions whose support stays two elements away from the cut
    let tb = c.basis();
    let far = |r: usize| {
        let (_, i2) = tb.unflat(c.dofs()[r]);
        tb.dirs[1].support(i2).1 <= 0.2 + 1e-12
    };
    assert!(wq.deviation_rows(&reference, far).unwrap() <= 1e-13 * reference.frobenius());
}

#[test]
fn mass_matrices_are_positive_definite() {
    for case in CASES {
        let c = config(Some(case), 3, 10);
        for s in [Strategy::Reference, Strategy::Hybrid, Strategy::Dwq] {
            let m = form(s, &c);
            let n = m.dim();
            let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| m.get(i, j));
            assert!(dense.cholesky().is_some(), "{case:?} {s}");
        }
    }
}

#[test]
fn reports_count_the_work() {
    let c = config(Some(CaseName::Circle), 3, 20);
    for s in Strategy::ALL {
        let (_, r) = form_with_timings(s, &c, &CoefficientField::identity(), FormOptions::default()).unwrap();
        assert!(r.t_total > 0.0 && r.cut_points > 0, "{s}");
        match s {
            Strategy::Reference => assert_eq!(r.wq_points, 0),
            Strategy::Dwq => {
                assert!(r.dwq_rule_sets > 0 && r.dwq_points > 0);
                assert_eq!(r.dwq_fallbacks, 0);
            }
            _ => assert!(r.wq_points > 0 && r.sum_factor_ops > 0),
        }
    }
}

#[test]
fn contraction_order_does_not_change_a_row() {
    let p = 3;
    let tb = TensorBasis2D::open_uniform(p, 9).unwrap();
    let rules: Vec<WeightedRuleSet> = (0..2).map(|d| WeightedRuleSet::for_basis(&tb.dirs[d], false).unwrap()).collect();
    let coef = |x: f64, y: f64| 1.0 + 0.3 * x - 0.2 * y * y;
    for (i1, i2) in [(0, 0), (4, 7), (11, 5)] {
        let row = |d: usize, i: usize| {
            let r = rules[d].row(i);
            Rule1D { table: rules[d].table(), start: r.start, weights: &r.weights }
        };
        let (r1, r2) = (row(0, i1), row(1, i2));
        let win = |d: usize, i: usize| {
            let o = tb.dirs[d].overlapping(i);
            Window { first: *o.start(), len: o.count() }
        };
        let (w1, w2) = (win(0, i1), win(1, i2));
        let pts = |d: usize| rules[d].layout().points();
        let c = |a: usize, b: usize| coef(pts(0)[r1.start + a], pts(1)[r2.start + b]);
        let mut out = vec![0.0; w1.len * w2.len];
        let mut rev = vec![0.0; w1.len * w2.len];
        let ops = sum_factor_row(r1, r2, w1, w2, c, &mut Vec::new(), &mut out);
        sum_factor_row_reversed(r1, r2, w1, w2, c, &mut rev);
        // brute force over every point pair
        let k = tb.dirs[0].knots().to_vec();
        let mut brute = vec![0.0; w1.len * w2.len];
        for a in 0..r1.len() {
            for b in 0..r2.len() {
                let (x, y) = (pts(0)[r1.start + a], pts(1)[r2.start + b]);
                for j1 in 0..w1.len {
                    for j2 in 0..w2.len {
                        brute[j1 * w2.len + j2] += r1.weights[a]
                            * r2.weights[b]
                            * coef(x, y)
                            * cox_de_boor(&k, p, w1.first + j1, x)
                            * cox_de_boor(&k, p, w2.first + j2, y);
                    }
                }
            }
        }
        for ((a, b), c) in out.iter().zip(&rev).zip(&brute) {
            assert!((a - b).abs() < 1e-15 && (a - c).abs() < 1e-15);
        }
        assert!(ops < r1.len() * r2.len() * w1.len * w2.len);
    }
}
