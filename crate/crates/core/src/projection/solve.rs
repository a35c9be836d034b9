use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::assembly::SparseMatrix;
use crate::error::{Error, Result};

/// Condition estimate above which a warning is logged.
pub const CONDITION_WARN: f64 = 1e12;

/// Target relative residual.
pub const SOLVE_TOL: f64 = 1e-13;

/// `n * bandwidth^2` above which the iterative solver is used.
const DIRECT_LIMIT: f64 = 2e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveMethod {
    BandedCholesky,
    ConjugateGradient,
}

/// Solution of a symmetric positive definite system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    /// `|Mx - b| / |b|`.
    pub relative_residual: f64,
    /// Condition estimate of the diagonally scaled matrix.
    pub condition: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `b - M x` with compensated row sums.
fn residual(m: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..m.dim())
        .map(|r| {
            let (cols, vals) = m.row(r);
            let (mut s, mut c) = (b[r], 0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                let y = -v * x[j] - c;
                let t = s + y;
                c = (t - s) - y;
                s = t;
            }
            s
        })
        .collect()
}

/// Cholesky factor of a symmetric band matrix, lower band stored by rows.
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Factors `D M D` with `D = diag(scale)`.
    pub fn factor(m: &SparseMatrix, scale: &[f64]) -> Result<Self> {
        let n = m.dim();
        let bw = m.bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    l[i * w + (j + bw - i)] = scale[i] * v * scale[j];
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = l[i * w + (j + bw - i)];
                for k in jlo..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotSpd { pivot: i, value: s });
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        y
    }
}

fn jacobi_scale(m: &SparseMatrix) -> Result<Vec<f64>> {
    m.diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| if d > 0.0 && d.is_finite() { Ok(1.0 / d.sqrt()) } else { Err(Error::NotSpd { pivot: i, value: d }) })
        .collect()
}

/// `D M D v`.
fn scaled_mul(m: &SparseMatrix, scale: &[f64], v: &[f64]) -> Vec<f64> {
    let dv: Vec<f64> = v.iter().zip(scale).map(|(a, s)| a * s).collect();
    m.mul_vec(&dv).iter().zip(scale).map(|(a, s)| a * s).collect()
}

/// Largest eigenvalue by power iteration and smallest by inverse iteration,
/// both on the scaled matrix.
fn condition_estimate(m: &SparseMatrix, scale: &[f64], chol: &BandCholesky) -> f64 {
    let n = m.dim();
    let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let unit = |v: Vec<f64>| {
        let s = norm(&v);
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let mut v = unit(start.clone());
    let mut lmax = 0.0;
    for _ in 0..60 {
        let w = scaled_mul(m, scale, &v);
        lmax = dot(&v, &w);
        v = unit(w);
    }
    let mut v = unit(start);
    let mut inv = 0.0;
    for _ in 0..60 {
        let w = chol.solve(&v);
        inv = dot(&v, &w);
        v = unit(w);
    }
    lmax * inv
}

/// Solves `M x = b` for symmetric positive definite `M`: banded Cholesky on
/// the Jacobi-scaled matrix with iterative refinement, or Jacobi-
/// preconditioned conjugate gradients for very wide bands.
pub fn solve_spd(m: &SparseMatrix, b: &[f64]) -> Result<SpdSolution> {
    let n = m.dim();
    if b.len() != n {
        return Err(Error::Dimension(format!("right-hand side has {} entries, matrix {n}", b.len())));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(SpdSolution {
            x: vec![0.0; n],
            relative_residual: 0.0,
            condition: 1.0,
            method: SolveMethod::BandedCholesky,
            iterations: 0,
        });
    }
    let scale = jacobi_scale(m)?;
    let bw = m.bandwidth() as f64;
    let sol = if (n as f64) * bw * bw <= DIRECT_LIMIT {
        let chol = BandCholesky::factor(m, &scale)?;
        let solve = |r: &[f64]| -> Vec<f64> {
            let rs: Vec<f64> = r.iter().zip(&scale).map(|(a, s)| a * s).collect();
            chol.solve(&rs).into_iter().zip(&scale).map(|(a, s)| a * s).collect()
        };
        let mut x = solve(b);
        let mut rel = norm(&residual(m, &x, b)) / bnorm;
        let mut its = 0;
        while rel > 0.01 * SOLVE_TOL && its < 5 {
            let r = residual(m, &x, b);
            let dx = solve(&r);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let trial_rel = norm(&residual(m, &trial, b)) / bnorm;
            its += 1;
            if trial_rel >= rel {
                break;
            }
            x = trial;
            rel = trial_rel;
        }
        let condition = condition_estimate(m, &scale, &chol);
        SpdSolution { x, relative_residual: rel, condition, method: SolveMethod::BandedCholesky, iterations: its }
    } else {
        conjugate_gradient(m, b, &scale)?
    };
    if sol.condition > CONDITION_WARN {
        log::warn!("scaled mass matrix condition estimate {:.3e} exceeds {:.0e}", sol.condition, CONDITION_WARN);
    }
    Ok(sol)
}

/// Lanczos steps kept for the condition estimate; the extreme eigenvalues
/// settle long before that.
const LANCZOS_STEPS: usize = 300;

/// Conjugate gradients on the scaled system `S M S y = S r`, `d = S y`,
/// down to a relative scaled residual of `tol`, recording the Lanczos
/// coefficients.
fn cg_pass(
    m: &SparseMatrix,
    rhs: &[f64],
    scale: &[f64],
    tol: f64,
    lanczos: &mut Vec<(f64, f64)>,
) -> Result<(Vec<f64>, usize)> {
    let n = m.dim();
    let apply = |v: &[f64]| -> Vec<f64> {
        let sv: Vec<f64> = v.iter().zip(scale).map(|(a, s)| a * s).collect();
        m.mul_vec(&sv).into_iter().zip(scale).map(|(a, s)| a * s).collect()
    };
    let mut r: Vec<f64> = rhs.iter().zip(scale).map(|(a, s)| a * s).collect();
    let target = tol * norm(&r);
    let mut y = vec![0.0; n];
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let max_it = 20 * n + 100;
    let mut it = 0;
    while it < max_it && rr.sqrt() > target {
        let q = apply(&p);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::NotSpd { pivot: it, value: pq });
        }
        let alpha = rr / pq;
        for k in 0..n {
            y[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        if lanczos.len() < LANCZOS_STEPS {
            lanczos.push((alpha, beta));
        }
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        it += 1;
    }
    Ok((y.iter().zip(scale).map(|(a, s)| a * s).collect(), it))
}

/// Jacobi-preconditioned conjugate gradients inside iterative refinement:
/// each pass solves for the correction of the current residual. The
/// condition estimate comes from the Lanczos tridiagonal of the first pass.
pub fn conjugate_gradient(m: &SparseMatrix, b: &[f64], scale: &[f64]) -> Result<SpdSolution> {
    let n = m.dim();
    let bnorm = norm(b);
    let mut lanczos = Vec::new();
    let mut x = vec![0.0; n];
    let mut rel = 1.0;
    let mut its = 0;
    for _ in 0..10 {
        let r = residual(m, &x, b);
        let (dx, k) = cg_pass(m, &r, scale, 1e-10, &mut lanczos)?;
        its += k;
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let trial_rel = norm(&residual(m, &trial, b)) / bnorm;
        if trial_rel >= rel {
            break;
        }
        x = trial;
        rel = trial_rel;
        if rel <= 0.01 * SOLVE_TOL {
            break;
        }
    }
    if rel > SOLVE_TOL {
        log::warn!("conjugate gradients stalled at relative residual {rel:.3e}");
    }
    let k = lanczos.len();
    let condition = if k == 0 {
        1.0
    } else {
        let mut t = DMatrix::zeros(k, k);
        for j in 0..k {
            let (alpha, beta) = lanczos[j];
            t[(j, j)] = 1.0 / alpha + if j > 0 { lanczos[j - 1].1 / lanczos[j - 1].0 } else { 0.0 };
            if j + 1 < k {
                let off = beta.sqrt() / alpha;
                t[(j, j + 1)] = off;
                t[(j + 1, j)] = off;
            }
        }
        let ev = SymmetricEigen::new(t).eigenvalues;
        let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        hi / lo
    };
    Ok(SpdSolution { x, relative_residual: rel, condition, method: SolveMethod::ConjugateGradient, iterations: its })
}
