use std::ops::Range;

use crate::splinecore::Basis1D;

/// Quadrature points of one parametric direction, grouped by element.
#[derive(Debug, Clone, PartialEq)]
pub struct PointLayout {
    points: Vec<f64>,
    offsets: Vec<usize>,
    bounds: Vec<(f64, f64)>,
}

impl PointLayout {
    /// `counts[e]` points per element, uniformly spaced and strictly interior:
    /// `a + (b - a) k / (n + 1)` for `k = 1..=n`.
    pub fn uniform(basis: &Basis1D, counts: &[usize]) -> Self {
        assert_eq!(counts.len(), basis.num_elements());
        let mut points = Vec::with_capacity(counts.iter().sum());
        let mut offsets = vec![0];
        let mut bounds = Vec::with_capacity(counts.len());
        for (el, &n) in basis.elements().iter().zip(counts) {
            for k in 1..=n {
                points.push(el.lo + el.size() * k as f64 / (n + 1) as f64);
            }
            offsets.push(points.len());
            bounds.push((el.lo, el.hi));
        }
        PointLayout { points, offsets, bounds }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.bounds.len()
    }

    pub fn element_points(&self, e: usize) -> &[f64] {
        &self.points[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn count(&self, e: usize) -> usize {
        self.offsets[e + 1] - self.offsets[e]
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..self.num_elements()).map(|e| self.count(e)).collect()
    }

    /// Point indices lying in the given element range.
    pub fn point_range(&self, elements: Range<usize>) -> Range<usize> {
        self.offsets[elements.start]..self.offsets[elements.end]
    }

    pub fn element_of_point(&self, k: usize) -> usize {
        self.offsets.partition_point(|&o| o <= k) - 1
    }

    /// Adds one point at the midpoint of the largest gap inside element `e`
    /// (gaps include those to the element ends).
    pub fn split_largest_gap(&mut self, e: usize) {
        let (lo, hi) = self.bounds[e];
        let pts = self.element_points(e);
        let mut prev = lo;
        let mut best = (f64::NEG_INFINITY, lo, hi);
        for &x in pts.iter().chain(std::iter::once(&hi)) {
            if x - prev > best.0 {
                best = (x - prev, prev, x);
            }
            prev = x;
        }
        let mid = 0.5 * (best.1 + best.2);
        let at = self.offsets[e] + pts.partition_point(|&x| x < mid);
        self.points.insert(at, mid);
        for o in &mut self.offsets[e + 1..] {
            *o += 1;
        }
    }

    /// True if every point of `other` is also a point of `self`.
    pub fn contains_layout(&self, other: &PointLayout) -> bool {
        other.points.iter().all(|x| self.points.binary_search_by(|y| y.total_cmp(x)).is_ok())
    }
}

/// Minimal per-element point counts for weighted quadrature: for every element,
/// the maximum over test functions whose support contains it of
/// `ceil(#overlapping trials / #support elements)`.
pub fn required_counts(basis: &Basis1D) -> Vec<usize> {
    let mut counts = vec![0usize; basis.num_elements()];
    for i in 0..basis.len() {
        let els = basis.support_elements(i);
        let trials = basis.overlapping(i).count();
        let need = trials.div_ceil(els.len());
        for c in &mut counts[els] {
            *c = (*c).max(need);
        }
    }
    counts
}

/// Uniform layout with the minimal point count per element.
pub fn place_wq_points(basis: &Basis1D) -> PointLayout {
    PointLayout::uniform(basis, &required_counts(basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splinecore::KnotVector;

    #[test]
    fn interior_elements_get_two_points() {
        for p in 1..=6 {
            let b = Basis1D::open_uniform(p, 20).unwrap();
            let c = required_counts(&b);
            for e in p..20 - p {
                assert_eq!(c[e], 2, "p={p} e={e}");
            }
            assert_eq!(c[0], p + 1);
        }
    }

    #[test]
    fn bezier_element_gets_p_plus_one() {
        for p in 1..=6 {
            let b = Basis1D::open_uniform(p, 1).unwrap();
            assert_eq!(required_counts(&b), vec![p + 1]);
        }
    }

    #[test]
    fn points_are_strictly_interior_and_uniform() {
        let kv = KnotVector::from_breakpoints(3, &[0.0, 0.1, 0.45, 1.0], &[2, 1]).unwrap();
        let b = Basis1D::new(kv).unwrap();
        let l = place_wq_points(&b);
        for (e, el) in b.elements().iter().enumerate() {
            let pts = l.element_points(e);
            let h = el.size() / (pts.len() + 1) as f64;
            for (k, &x) in pts.iter().enumerate() {
                assert!(el.contains_open(x));
                assert!((x - (el.lo + h * (k + 1) as f64)).abs() < 1e-15);
            }
        }
        assert!(l.points().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn solvability_count_holds() {
        for p in 1..=6 {
            let b = Basis1D::open_uniform(p, 9).unwrap();
            let l = place_wq_points(&b);
            for i in 0..b.len() {
                let n_pts = l.point_range(b.support_elements(i)).len();
                assert!(n_pts >= b.overlapping(i).count());
            }
        }
    }

    #[test]
    fn gap_splitting_is_nested() {
        let b = Basis1D::open_uniform(2, 3).unwrap();
        let base = place_wq_points(&b);
        let mut l = base.clone();
        l.split_largest_gap(1);
        l.split_largest_gap(1);
        assert_eq!(l.count(1), base.count(1) + 2);
        assert!(l.contains_layout(&base));
        assert!(l.points().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(l.element_of_point(l.point_range(1..2).start), 1);
    }
}
