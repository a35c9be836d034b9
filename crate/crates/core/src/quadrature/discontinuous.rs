use std::collections::BTreeSet;

use super::layout::{required_counts, PointLayout};
use super::weighted::{fit_with_enrichment, BasisTable, WeightRow};
use crate::error::{Error, Result};
use crate::splinecore::{insert_knots, Basis1D, SubdivisionMatrix};

/// Which side of an artificial discontinuity is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Side {
    Lower,
    Upper,
}

/// Weighted rules that stay exact when everything on one side of `u_disc`
/// is discarded.
///
/// Rows exist for the coarse test functions whose support contains `u_disc`
/// in its interior. They live on an augmented layout that contains the
/// original layout.
#[derive(Debug, Clone)]
pub struct DiscontinuousRuleSet {
    u_disc: f64,
    layout: PointLayout,
    table: BasisTable,
    split: usize,
    rows: Vec<Option<WeightRow>>,
    refined: Basis1D,
    subdivision: SubdivisionMatrix,
}

impl DiscontinuousRuleSet {
    pub fn u_disc(&self) -> f64 {
        self.u_disc
    }

    /// Augmented layout (original points plus nested ones).
    pub fn layout(&self) -> &PointLayout {
        &self.layout
    }

    /// Coarse basis values at the augmented points.
    pub fn table(&self) -> &BasisTable {
        &self.table
    }

    pub fn refined_basis(&self) -> &Basis1D {
        &self.refined
    }

    pub fn subdivision(&self) -> &SubdivisionMatrix {
        &self.subdivision
    }

    /// Index of the first augmented point above `u_disc`.
    pub fn split(&self) -> usize {
        self.split
    }

    pub fn row(&self, i: usize) -> Option<&WeightRow> {
        self.rows.get(i).and_then(|r| r.as_ref())
    }

    /// Tests that carry a discontinuous rule.
    pub fn tests(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().enumerate().filter_map(|(i, r)| r.as_ref().map(|_| i))
    }

    /// Weights of test `i` restricted to one side: `(first point, weights)`.
    pub fn one_sided(&self, i: usize, side: Side) -> Option<(usize, &[f64])> {
        let row = self.row(i)?;
        let r = row.range();
        let (a, b) = match side {
            Side::Lower => (r.start, r.end.min(self.split)),
            Side::Upper => (r.start.max(self.split), r.end),
        };
        let (a, b) = (a.min(b), b);
        Some((a, &row.weights[a - row.start..b - row.start]))
    }
}

/// Builds discontinuous weighted quadrature at the breakpoint `u_disc`:
/// knot insertion to `C^-1`, nested point augmentation, moment fitting on
/// the refined basis, and the map back `w = S^T w~`.
pub fn build_dwq(
    basis: &Basis1D,
    layout: &PointLayout,
    u_disc: f64,
    parallel: bool,
) -> Result<DiscontinuousRuleSet> {
    let kv = basis.knot_vector();
    let u = kv.snap(u_disc).ok_or(Error::NotBreakpoint(u_disc))?;
    if u <= kv.first() || u >= kv.last() {
        return Err(Error::NotBreakpoint(u_disc));
    }
    let p = basis.degree();
    let m = kv.multiplicity(u);
    let inserts = vec![u; p + 1 - m];
    let (refined, s) = insert_knots(basis, &inserts)?;

    let mut augmented = layout.clone();
    let need = required_counts(&refined);
    for (e, &n) in need.iter().enumerate() {
        while augmented.count(e) < n {
            augmented.split_largest_gap(e);
        }
    }

    let coarse_tests: Vec<usize> = (0..basis.len())
        .filter(|&i| {
            let (a, b) = basis.support(i);
            a < u && u < b
        })
        .collect();
    let refined_tests: Vec<usize> = coarse_tests
        .iter()
        .flat_map(|&i| s.column(i).into_iter().map(|(l, _)| l))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let (augmented, _, fitted) = fit_with_enrichment(&refined, augmented, &refined_tests, parallel)?;
    let mut refined_rows = vec![None; refined.len()];
    for (&l, (row, _)) in refined_tests.iter().zip(fitted) {
        refined_rows[l] = Some(row);
    }

    let mut rows = vec![None; basis.len()];
    for &i in &coarse_tests {
        let range = augmented.point_range(basis.support_elements(i));
        let mut w = vec![0.0; range.len()];
        for (l, sli) in s.column(i) {
            let wl: &WeightRow = refined_rows[l].as_ref().expect("fitted above");
            for (k, v) in wl.iter() {
                w[k - range.start] += sli * v;
            }
        }
        rows[i] = Some(WeightRow { start: range.start, weights: w });
    }

    let split = augmented.points().partition_point(|&x| x < u);
    let table = BasisTable::new(basis, augmented.points());
    Ok(DiscontinuousRuleSet { u_disc: u, layout: augmented, table, split, rows, refined, subdivision: s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{exact_moments, place_wq_points};
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_non_breakpoints() {
        let b = Basis1D::open_uniform(2, 4).unwrap();
        let l = place_wq_points(&b);
        assert_eq!(build_dwq(&b, &l, 0.3, false).unwrap_err(), Error::NotBreakpoint(0.3));
        assert!(build_dwq(&b, &l, 0.0, false).is_err());
    }

    #[test]
    fn full_interval_exactness_is_preserved() {
        for p in 1..=5 {
            let b = Basis1D::open_uniform(p, 8).unwrap();
            let l = place_wq_points(&b);
            let d = build_dwq(&b, &l, 0.5, false).unwrap();
            assert!(d.layout().contains_layout(&l));
            for i in d.tests() {
                let m = exact_moments(&b, i);
                let j0 = *b.overlapping(i).start();
                for (jj, mj) in m.iter().enumerate() {
                    let q: f64 = d.row(i).unwrap().iter().map(|(k, w)| w * d.table().value(j0 + jj, k)).sum();
                    assert_abs_diff_eq!(q, mj, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn discontinuity_adds_points_next_to_it() {
        let p = 4;
        let b = Basis1D::open_uniform(p, 10).unwrap();
        let l = place_wq_points(&b);
        let d = build_dwq(&b, &l, 0.5, false).unwrap();
        let e_left = b.element_of(0.45).unwrap();
        assert!(d.layout().count(e_left) >= p + 1);
        assert!(d.layout().count(e_left + 1) >= p + 1);
        assert_eq!(d.layout().count(0), l.count(0));
        let (start, w) = d.one_sided(5, Side::Lower).unwrap();
        assert!(w.is_empty() || d.layout().points()[start + w.len() - 1] < 0.5);
    }
}
