mod common;

use common::{cox_de_boor, random_knots};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use trimquad::splinecore::{insert_knots, subdivision_matrix_to, Basis1D, KnotVector, TensorBasis2D};
use trimquad::Error;

fn basis(knots: &[f64], p: usize) -> Basis1D {
    Basis1D::new(KnotVector::new(knots.to_vec(), p).unwrap()).unwrap()
}

/// Knots to insert: fresh values plus repeats of existing breakpoints,
/// never pushing a multiplicity past p.
fn insertion_plan(rng: &mut StdRng, kv: &KnotVector) -> Vec<f64> {
    let p = kv.degree();
    let mut current = kv.knots().to_vec();
    let mut plan = Vec::new();
    for _ in 0..rng.gen_range(1..=6) {
        let u = if rng.gen_bool(0.4) {
            let interior: Vec<f64> = kv.breakpoints()[1..kv.breakpoints().len() - 1].to_vec();
            if interior.is_empty() {
                rng.gen_range(0.01..0.99)
            } else {
                interior[rng.gen_range(0..interior.len())]
            }
        } else {
            rng.gen_range(0.01..0.99)
        };
        if current.iter().filter(|&&k| k == u).count() < p {
            current.push(u);
            current.sort_by(f64::total_cmp);
            plan.push(u);
        }
    }
    plan
}

#[test]
fn evaluation_matches_recursive_oracle_on_random_knots() {
    let mut rng = StdRng::seed_from_u64(11);
    for p in 0..=6 {
        for _ in 0..10 {
            let e = rng.gen_range(1..8);
            let knots = random_knots(&mut rng, p, e, p.max(1));
            let b = basis(&knots, p);
            for k in 0..=200 {
                let u = k as f64 / 200.0;
                for i in 0..b.len() {
                    let got = b.eval(i, u).unwrap();
                    let want = cox_de_boor(&knots, p, i, u);
                    assert!((got - want).abs() < 1e-13, "p={p} i={i} u={u}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn partition_of_unity_and_nonnegativity() {
    let mut rng = StdRng::seed_from_u64(12);
    for p in 1..=6 {
        let knots = random_knots(&mut rng, p, 7, p);
        let b = basis(&knots, p);
        for _ in 0..500 {
            let u = rng.gen_range(0.0..=1.0);
            let (_, vals) = b.eval_nonzero(u).unwrap();
            assert!(vals.iter().all(|&v| v >= -1e-15));
            assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn tensor_values_are_products() {
    let tb = TensorBasis2D::open_uniform(3, 5).unwrap();
    let (n1, n2) = tb.shape();
    let knots = tb.dirs[0].knots().to_vec();
    for (u1, u2) in [(0.13, 0.71), (0.5, 0.2), (1.0, 0.0)] {
        let mut total = 0.0;
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let v = tb.eval(i1, i2, u1, u2).unwrap();
                let want = cox_de_boor(&knots, 3, i1, u1) * cox_de_boor(&knots, 3, i2, u2);
                assert!((v - want).abs() < 1e-14);
                assert_eq!(tb.unflat(tb.flat(i1, i2)), (i1, i2));
                total += v;
            }
        }
        assert!((total - 1.0).abs() < 1e-14);
    }
}

#[test]
fn invalid_knot_vectors_are_rejected() {
    let bad = [
        (vec![0.0, 0.0, 1.0], 1),
        (vec![0.0, 0.0, 0.5, 0.4, 1.0, 1.0], 1),
        (vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 1),
        (vec![0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0], 1),
        (vec![1.0, 1.0, 1.0, 1.0], 1),
        (vec![0.0, 0.0, f64::NAN, 1.0, 1.0], 1),
    ];
    for (k, p) in bad {
        assert!(matches!(KnotVector::new(k.clone(), p), Err(Error::InvalidKnotVector(_))), "{k:?}");
    }
}

#[test]
fn inserting_past_full_multiplicity_fails() {
    let b = Basis1D::open_uniform(2, 4).unwrap();
    assert!(insert_knots(&b, &[0.5, 0.5]).is_ok());
    assert!(matches!(insert_knots(&b, &[0.5, 0.5, 0.5]), Err(Error::Multiplicity { .. })));
    assert!(matches!(insert_knots(&b, &[1.5]), Err(Error::Domain { .. })));
}

/// 100 random insertion scenarios, coarse spline reproduced through S at
/// 1000 points.
#[test]
fn subdivision_reproduces_coarse_splines() {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = rng.gen_range(1..=6);
        let e = rng.gen_range(1..9);
        let knots = random_knots(&mut rng, p, e, p);
        let coarse = basis(&knots, p);
        let plan = insertion_plan(&mut rng, coarse.knot_vector());
        let (fine, s) = insert_knots(&coarse, &plan).unwrap();
        assert_eq!(s.shape(), (fine.len(), coarse.len()));
        let c: Vec<f64> = (0..coarse.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cf = s.apply(&c);
        let fk = fine.knots().to_vec();
        for k in 0..1000 {
            let u = k as f64 / 999.0;
            let want: f64 = (0..coarse.len()).map(|i| c[i] * cox_de_boor(&knots, p, i, u)).sum();
            let got: f64 = (0..fine.len()).map(|i| cf[i] * cox_de_boor(&fk, p, i, u)).sum();
            worst = worst.max((got - want).abs());
        }
        // the same map from the target knot multiset directly
        let direct = subdivision_matrix_to(&coarse, &fk).unwrap();
        for (a, b) in direct.to_dense().iter().flatten().zip(s.to_dense().iter().flatten()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
    assert!(worst <= 1e-13, "worst reproduction error {worst:e}");
}

#[test]
fn non_nested_targets_are_rejected() {
    let b = Basis1D::open_uniform(2, 4).unwrap();
    let mut other = Basis1D::open_uniform(2, 3).unwrap().knots().to_vec();
    other.push(0.5);
    other.sort_by(f64::total_cmp);
    assert_eq!(subdivision_matrix_to(&b, &other).unwrap_err(), Error::NotNested);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subdivision_columns_sum_to_one(p in 1usize..=6, e in 1usize..8, u in 0.01f64..0.99, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let knots = random_knots(&mut rng, p, e, p);
        let b = basis(&knots, p);
        prop_assume!(b.knot_vector().multiplicity(u) == 0);
        let (_, s) = insert_knots(&b, &[u]).unwrap();
        // partition of unity on both sides means every fine row sums to one
        for r in s.to_dense() {
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            prop_assert!(r.iter().all(|&v| v >= 0.0));
        }
    }
}
