//! Independent oracles shared by the integration tests, and checks of the
//! library's weighted rules against them. The oracles never call into the
//! library's evaluation or quadrature code.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use trimquad::quadrature::{build_dwq, Side, WeightedRuleSet};
use trimquad::splinecore::{Basis1D, KnotVector};

/// Textbook recursive Cox-de Boor. The last function is 1 at the right end.
pub fn cox_de_boor(knots: &[f64], p: usize, i: usize, u: f64) -> f64 {
    let last = knots[knots.len() - 1];
    let n = knots.len() - p - 1;
    if u >= last {
        return if i == n - 1 { 1.0 } else { 0.0 };
    }
    naive(knots, p, i, u)
}

fn naive(k: &[f64], p: usize, i: usize, u: f64) -> f64 {
    if p == 0 {
        return if k[i] <= u && u < k[i + 1] { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = k[i + p] - k[i];
    if d1 > 0.0 {
        v += (u - k[i]) / d1 * naive(k, p - 1, i, u);
    }
    let d2 = k[i + p + 1] - k[i + 1];
    if d2 > 0.0 {
        v += (k[i + p + 1] - u) / d2 * naive(k, p - 1, i + 1, u);
    }
    v
}

/// Gauss-Legendre nodes and weights on [-1, 1] from the Jacobi matrix
/// eigenproblem (Golub-Welsch).
pub fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut nw: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    nw.sort_by(|a, b| a.0.total_cmp(&b.0));
    nw.into_iter().unzip()
}

pub struct Oracle {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Oracle {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = golub_welsch(n);
        Oracle { nodes, weights }
    }

    pub fn on(&self, a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * r * f(m + r * x)).sum()
    }

    /// Sum over the given break intervals; exact for piecewise polynomials
    /// of degree < 2n with those breaks.
    pub fn piecewise(&self, breaks: &[f64], f: &dyn Fn(f64) -> f64) -> f64 {
        breaks.windows(2).filter(|w| w[1] > w[0]).map(|w| self.on(w[0], w[1], f)).sum()
    }

    /// Adaptive bisection on every piece of [a, b] cut at `kinks`. Plain
    /// bisection is not enough: a kink very close to an interval end is
    /// missed identically by the whole interval and its halves.
    pub fn adaptive(&self, a: f64, b: f64, kinks: &[f64], f: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
        let mut cuts = vec![a];
        cuts.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
        cuts.push(b);
        cuts.windows(2)
            .map(|w| {
                let whole = self.on(w[0], w[1], f);
                self.refine(w[0], w[1], whole, f, tol, 0)
            })
            .sum()
    }

    fn refine(&self, a: f64, b: f64, whole: f64, f: &dyn Fn(f64) -> f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (self.on(a, m, f), self.on(m, b, f));
        if (l + r - whole).abs() <= tol || depth >= 60 {
            return l + r;
        }
        self.refine(a, m, l, f, tol, depth + 1) + self.refine(m, b, r, f, tol, depth + 1)
    }
}

/// Random open knot vector on [0, 1]: `elements` random gaps and interior
/// multiplicities in 1..=max_mult.
pub fn random_knots(rng: &mut impl Rng, p: usize, elements: usize, max_mult: usize) -> Vec<f64> {
    let gaps: Vec<f64> = (0..elements).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let mut knots = vec![0.0; p + 1];
    let mut acc = 0.0;
    for g in &gaps[..elements - 1] {
        acc += g / total;
        let m = rng.gen_range(1..=max_mult);
        knots.extend(std::iter::repeat(acc).take(m));
    }
    knots.extend(std::iter::repeat(1.0).take(p + 1));
    knots
}

/// Distinct values of a knot vector.
pub fn breaks(knots: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = knots.to_vec();
    out.dedup();
    out
}

/// Relative Frobenius distance of two dense matrices.
pub fn rel_frobenius(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (mut d, mut n) = (0.0, 0.0);
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            d += (x - y) * (x - y);
            n += y * y;
        }
    }
    (d / n).sqrt()
}

fn basis(knots: &[f64], p: usize) -> Basis1D {
    Basis1D::new(KnotVector::new(knots.to_vec(), p).unwrap()).unwrap()
}

/// Functions whose supports overlap that of `i` on a set of positive length.
pub fn trials(knots: &[f64], p: usize, i: usize) -> Vec<usize> {
    let n = knots.len() - p - 1;
    (0..n).filter(|&j| knots[i].max(knots[j]) < knots[i + p + 1].min(knots[j + p + 1])).collect()
}

/// Worst moment residual of a rule `(points, weights)` for test `i`,
/// relative to the largest moment of the row, against `exact(j)`.
pub fn residual(
    knots: &[f64],
    p: usize,
    i: usize,
    pts: &[f64],
    w: &[f64],
    exact: &dyn Fn(usize) -> f64,
) -> f64 {
    let js = trials(knots, p, i);
    let moments: Vec<f64> = js.iter().map(|&j| exact(j)).collect();
    let scale = moments.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    js.iter()
        .zip(&moments)
        .map(|(&j, m)| {
            let q: f64 = pts.iter().zip(w).map(|(&x, &wk)| wk * cox_de_boor(knots, p, j, x)).sum();
            (q - m).abs() / scale
        })
        .fold(0.0, f64::max)
}

pub fn product(knots: &[f64], p: usize, i: usize, j: usize) -> impl Fn(f64) -> f64 + '_ {
    move |x| cox_de_boor(knots, p, i, x) * cox_de_boor(knots, p, j, x)
}

/// Worst relative moment residual over all rows of the weighted rules.
pub fn check_wq(knots: &[f64], p: usize) -> f64 {
    let b = basis(knots, p);
    let rules = WeightedRuleSet::for_basis(&b, false).unwrap();
    let oracle = Oracle::new(10);
    let br = breaks(knots);
    let pts = rules.layout().points();
    let mut worst = 0.0f64;
    for i in 0..b.len() {
        let row = rules.row(i);
        let r = row.range();
        let f = |j: usize| oracle.piecewise(&br, &product(knots, p, i, j));
        worst = worst.max(residual(knots, p, i, &pts[r], &row.weights, &f));
    }
    worst
}

/// Worst relative residuals of the discontinuous rules at `u`: full moment
/// systems, and one-sided sums against adaptive integration up to `u`.
pub fn check_dwq(knots: &[f64], p: usize, u: f64) -> (f64, f64) {
    let b = basis(knots, p);
    let wq = WeightedRuleSet::for_basis(&b, false).unwrap();
    let d = build_dwq(&b, wq.layout(), u, false).unwrap();
    let oracle = Oracle::new(10);
    let br = breaks(knots);
    let pts = d.layout().points();
    let (mut full, mut sided) = (0.0f64, 0.0f64);
    for i in d.tests() {
        let row = d.row(i).unwrap();
        let f = |j: usize| oracle.piecewise(&br, &product(knots, p, i, j));
        full = full.max(residual(knots, p, i, &pts[row.range()], &row.weights, &f));
        for side in [Side::Lower, Side::Upper] {
            let (start, w) = d.one_sided(i, side).unwrap();
            let (a, c) = match side {
                Side::Lower => (0.0, u),
                Side::Upper => (u, 1.0),
            };
            let f = |j: usize| oracle.adaptive(a, c, &br, &product(knots, p, i, j), 1e-17);
            sided = sided.max(residual(knots, p, i, &pts[start..start + w.len()], w, &f));
        }
    }
    (full, sided)
}
