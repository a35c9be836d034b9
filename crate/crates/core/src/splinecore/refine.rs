use super::basis::Basis1D;
use super::knots::{KnotVector, KNOT_TOL};
use crate::error::{Error, Result};

/// Sparse map from coarse to fine spline coefficients, `c_fine = S c_coarse`.
///
/// Equivalently every coarse function is a combination of fine ones,
/// `B_j = sum_i S_ij B~_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdivisionMatrix {
    source: Basis1D,
    target: Basis1D,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SubdivisionMatrix {
    pub fn identity(basis: &Basis1D) -> Self {
        let n = basis.len();
        SubdivisionMatrix {
            source: basis.clone(),
            target: basis.clone(),
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn source(&self) -> &Basis1D {
        &self.source
    }

    pub fn target(&self) -> &Basis1D {
        &self.target
    }

    /// `(rows, cols)` = `(fine count, coarse count)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.target.len(), self.source.len())
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Fine coefficients of the spline with coarse coefficients `coarse`.
    pub fn apply(&self, coarse: &[f64]) -> Vec<f64> {
        (0..self.target.len()).map(|i| self.row(i).map(|(j, v)| v * coarse[j]).sum()).collect()
    }

    /// Coarse-side column `j` as `(fine index, value)` pairs.
    pub fn column(&self, j: usize) -> Vec<(usize, f64)> {
        (0..self.target.len())
            .filter_map(|i| {
                let v = self.get(i, j);
                (v != 0.0).then_some((i, v))
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let (m, n) = self.shape();
        let mut d = vec![vec![0.0; n]; m];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// `self` followed by `next`: the product `next * self`.
    pub fn then(&self, next: &SubdivisionMatrix) -> Result<SubdivisionMatrix> {
        if next.source.knot_vector() != self.target.knot_vector() {
            return Err(Error::Dimension("subdivision matrices do not chain".into()));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut acc = vec![0.0; self.source.len()];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..next.target.len() {
            for (k, a) in next.row(i) {
                for (j, b) in self.row(k) {
                    if acc[j] == 0.0 && !touched.contains(&j) {
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    cols.push(j);
                    vals.push(acc[j]);
                }
                acc[j] = 0.0;
            }
            touched.clear();
            row_ptr.push(cols.len());
        }
        Ok(SubdivisionMatrix {
            source: self.source.clone(),
            target: next.target.clone(),
            row_ptr,
            cols,
            vals,
        })
    }
}

/// Single knot insertion (Boehm). Returns the refined basis and the
/// `(n + 1) x n` subdivision matrix.
pub fn insert_knot(basis: &Basis1D, u: f64) -> Result<(Basis1D, SubdivisionMatrix)> {
    let kv = basis.knot_vector();
    let (lo, hi) = basis.domain();
    if !(lo..=hi).contains(&u) {
        return Err(Error::Domain { u, lo, hi });
    }
    let (refined_kv, u) = kv.with_inserted(u)?;
    let p = basis.degree();
    let k = kv.knots();
    let span = kv.find_span(u)?;
    let n = basis.len();
    let alpha = |i: usize| -> f64 {
        if i + p <= span {
            1.0
        } else if i <= span {
            (u - k[i]) / (k[i + p] - k[i])
        } else {
            0.0
        }
    };
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for i in 0..=n {
        let a = alpha(i);
        if i > 0 && 1.0 - a != 0.0 {
            cols.push(i - 1);
            vals.push(1.0 - a);
        }
        if i < n && a != 0.0 {
            cols.push(i);
            vals.push(a);
        }
        row_ptr.push(cols.len());
    }
    let target = Basis1D::new(refined_kv)?;
    let s = SubdivisionMatrix { source: basis.clone(), target: target.clone(), row_ptr, cols, vals };
    Ok((target, s))
}

/// Inserts `knots` one at a time in the given order and returns the
/// composite matrix.
pub fn insert_knots(basis: &Basis1D, knots: &[f64]) -> Result<(Basis1D, SubdivisionMatrix)> {
    let mut s = SubdivisionMatrix::identity(basis);
    let mut current = basis.clone();
    for &u in knots {
        let (next, step) = insert_knot(&current, u)?;
        s = s.then(&step)?;
        current = next;
    }
    Ok((current, s))
}

/// Subdivision matrix onto a nested knot vector given as a knot multiset.
pub fn subdivision_matrix_to(basis: &Basis1D, target: &[f64]) -> Result<SubdivisionMatrix> {
    let target = KnotVector::new(target.to_vec(), basis.degree()).map_err(|_| Error::NotNested)?;
    let src = basis.knot_vector();
    if (target.first() - src.first()).abs() > KNOT_TOL || (target.last() - src.last()).abs() > KNOT_TOL {
        return Err(Error::NotNested);
    }
    let mut extra = Vec::new();
    for u in target.breakpoints() {
        let (mt, ms) = (target.multiplicity(u), src.multiplicity(u));
        if ms > mt {
            return Err(Error::NotNested);
        }
        extra.extend(std::iter::repeat(u).take(mt - ms));
    }
    for u in src.breakpoints() {
        if target.multiplicity(u) == 0 {
            return Err(Error::NotNested);
        }
    }
    Ok(insert_knots(basis, &extra)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bezier_quadratic_midpoint_insertion() {
        let b = Basis1D::new(KnotVector::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 2).unwrap()).unwrap();
        let (fine, s) = insert_knot(&b, 0.5).unwrap();
        assert_eq!(fine.knots(), &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        let d = s.to_dense();
        let expect = [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]];
        for (r, e) in d.iter().zip(expect.iter()) {
            for (a, b) in r.iter().zip(e.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn row_sums_are_one() {
        let b = Basis1D::new(KnotVector::from_breakpoints(3, &[0.0, 0.2, 0.7, 1.0], &[1, 2]).unwrap()).unwrap();
        for u in [0.1, 0.2, 0.7, 0.95] {
            let (_, s) = insert_knot(&b, u).unwrap();
            for i in 0..s.shape().0 {
                assert!(s.row(i).count() <= 2);
                assert_abs_diff_eq!(s.row(i).map(|(_, v)| v).sum::<f64>(), 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn existing_knot_multiplicity_grows() {
        let b = Basis1D::open_uniform(2, 4).unwrap();
        let (fine, _) = insert_knot(&b, 0.5).unwrap();
        assert_eq!(fine.knot_vector().multiplicity(0.5), 2);
        let (fine, _) = insert_knot(&fine, 0.5).unwrap();
        let err = insert_knot(&fine, 0.5).unwrap_err();
        assert!(matches!(err, Error::Multiplicity { m: 3, p: 2, .. }));
    }

    #[test]
    fn identity_when_target_equals_source() {
        let b = Basis1D::open_uniform(3, 5).unwrap();
        let s = subdivision_matrix_to(&b, b.knots()).unwrap();
        let d = s.to_dense();
        for (i, row) in d.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn full_multiplicity_decouples() {
        let p = 3;
        let b = Basis1D::open_uniform(p, 4).unwrap();
        let mut target = b.knots().to_vec();
        target.extend([0.5; 3]);
        target.sort_by(f64::total_cmp);
        let s = subdivision_matrix_to(&b, &target).unwrap();
        let fine = s.target().clone();
        assert_eq!(fine.knot_vector().multiplicity(0.5), p + 1);
        // every fine function lives on one side of 0.5
        for i in 0..fine.len() {
            let (a, c) = fine.support(i);
            assert!(c <= 0.5 || a >= 0.5);
        }
    }

    #[test]
    fn not_nested_is_rejected() {
        let b = Basis1D::open_uniform(2, 4).unwrap();
        let target = [0.0, 0.0, 0.0, 0.3, 0.5, 0.75, 1.0, 1.0, 1.0];
        assert_eq!(subdivision_matrix_to(&b, &target).unwrap_err(), Error::NotNested);
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let b = Basis1D::open_uniform(3, 3).unwrap();
        let (_, s1) = insert_knots(&b, &[0.1, 0.5, 0.8, 0.5]).unwrap();
        let (_, s2) = insert_knots(&b, &[0.8, 0.5, 0.5, 0.1]).unwrap();
        let (d1, d2) = (s1.to_dense(), s2.to_dense());
        for (r1, r2) in d1.iter().zip(d2.iter()) {
            for (a, b) in r1.iter().zip(r2.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
        }
    }
}
