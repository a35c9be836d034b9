use std::collections::BTreeSet;
use std::ops::Range;

use serde::Serialize;

use super::cases::TrimmedDomain;
use super::cutcell::{boundary_hits, crosses_interior, Rect};
use crate::error::{Error, Result};
use crate::quadrature::Side;
use crate::splinecore::TensorBasis2D;

/// Class of a mesh element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ElementClass {
    Interior,
    Exterior,
    Cut,
}

/// Class of a basis function, from the elements of its support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BasisClass {
    Interior,
    Exterior,
    Cut,
}

/// Extent of a discontinuous-rule box in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BoxSide {
    /// The whole support; the standard weighted rule applies.
    Full,
    /// One side of an artificial discontinuity.
    Split { u_disc: f64, side: Side },
}

/// Part of a cut function's regular support integrated with discontinuous
/// weighted quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DwqPlan {
    pub sides: [BoxSide; 2],
    /// Element ranges of the box per direction.
    pub elements: [Range<usize>; 2],
    /// Regular elements outside the box; integrated with Gauss.
    pub rest: Vec<(usize, usize)>,
}

/// Support split of one cut basis function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutFunction {
    pub index: (usize, usize),
    /// Interior elements of the support.
    pub regular: Vec<(usize, usize)>,
    /// Cut elements of the support.
    pub trimmed: Vec<(usize, usize)>,
    /// Artificial discontinuities bounding the box, at most one per
    /// direction.
    pub u_disc: [Vec<f64>; 2],
    /// The regular support is empty or has a box.
    pub eligible: bool,
    pub plan: Option<DwqPlan>,
}

/// Element and basis classification of a trimmed tensor-product space.
#[derive(Debug, Clone)]
pub struct TrimConfiguration {
    basis: TensorBasis2D,
    domain: TrimmedDomain,
    elements: Vec<ElementClass>,
    classes: Vec<BasisClass>,
    cut: Vec<CutFunction>,
    cut_of: Vec<Option<usize>>,
    dofs: Vec<usize>,
    dof_of: Vec<Option<usize>>,
    u_disc: [Vec<f64>; 2],
}

/// Samples per curve used to detect curve pieces hidden inside an element.
const CONTAINMENT_SAMPLES: usize = 4000;

impl TrimConfiguration {
    /// Classifies elements and functions of `basis` against `domain`.
    pub fn new(basis: &TensorBasis2D, domain: &TrimmedDomain) -> Result<Self> {
        let (ne1, ne2) = basis.element_shape();
        let mut elements = vec![ElementClass::Interior; ne1 * ne2];
        if let Some(curve) = domain.curve() {
            for e1 in 0..ne1 {
                for e2 in 0..ne2 {
                    let rect = Rect::of_element(basis, e1, e2);
                    let hits = boundary_hits(curve, &rect);
                    elements[e1 * ne2 + e2] = if hits.len() >= 2 && crosses_interior(curve, &rect, &hits) {
                        ElementClass::Cut
                    } else if domain.contains(rect.center()) {
                        ElementClass::Interior
                    } else {
                        ElementClass::Exterior
                    };
                }
            }
            check_containment(basis, domain, &elements)?;
        }

        let (n1, n2) = basis.shape();
        let mut classes = Vec::with_capacity(n1 * n2);
        let mut cut = Vec::new();
        let mut cut_of = vec![None; n1 * n2];
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let r1 = basis.dirs[0].support_elements(i1);
                let r2 = basis.dirs[1].support_elements(i2);
                let (mut int, mut ext, mut ct) = (0, 0, 0);
                for e1 in r1.clone() {
                    for e2 in r2.clone() {
                        match elements[e1 * ne2 + e2] {
                            ElementClass::Interior => int += 1,
                            ElementClass::Exterior => ext += 1,
                            ElementClass::Cut => ct += 1,
                        }
                    }
                }
                let class = if ct == 0 && ext == 0 {
                    BasisClass::Interior
                } else if ct == 0 && int == 0 {
                    BasisClass::Exterior
                } else {
                    BasisClass::Cut
                };
                if class == BasisClass::Cut {
                    cut_of[i1 * n2 + i2] = Some(cut.len());
                    cut.push(analyse_cut(basis, &elements, (i1, i2), [r1, r2]));
                }
                classes.push(class);
            }
        }

        let mut dof_of = vec![None; n1 * n2];
        let mut dofs = Vec::new();
        for (i, c) in classes.iter().enumerate() {
            if *c != BasisClass::Exterior {
                dof_of[i] = Some(dofs.len());
                dofs.push(i);
            }
        }

        let mut u_disc: [BTreeSet<u64>; 2] = Default::default();
        for f in cut.iter().filter_map(|f| f.plan.as_ref()) {
            for (d, side) in f.sides.iter().enumerate() {
                if let BoxSide::Split { u_disc: u, .. } = side {
                    u_disc[d].insert(u.to_bits());
                }
            }
        }
        let u_disc = u_disc.map(|s| {
            let mut v: Vec<f64> = s.into_iter().map(f64::from_bits).collect();
            v.sort_by(f64::total_cmp);
            v
        });

        Ok(TrimConfiguration {
            basis: basis.clone(),
            domain: domain.clone(),
            elements,
            classes,
            cut,
            cut_of,
            dofs,
            dof_of,
            u_disc,
        })
    }

    pub fn basis(&self) -> &TensorBasis2D {
        &self.basis
    }

    pub fn domain(&self) -> &TrimmedDomain {
        &self.domain
    }

    pub fn element_class(&self, e1: usize, e2: usize) -> ElementClass {
        self.elements[self.basis.element_flat(e1, e2)]
    }

    pub fn element_classes(&self) -> &[ElementClass] {
        &self.elements
    }

    /// Cut elements in flat order.
    pub fn cut_elements(&self) -> Vec<(usize, usize)> {
        (0..self.elements.len())
            .filter(|&e| self.elements[e] == ElementClass::Cut)
            .map(|e| self.basis.element_unflat(e))
            .collect()
    }

    /// Class of the function with flat index `i`.
    pub fn basis_class(&self, i: usize) -> BasisClass {
        self.classes[i]
    }

    pub fn basis_classes(&self) -> &[BasisClass] {
        &self.classes
    }

    pub fn cut_functions(&self) -> &[CutFunction] {
        &self.cut
    }

    /// Support split of the function with flat index `i`, if it is cut.
    pub fn cut_function(&self, i: usize) -> Option<&CutFunction> {
        self.cut_of[i].map(|k| &self.cut[k])
    }

    /// Flat indices of the retained (non-exterior) functions; position in
    /// this list is the degree of freedom.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn dof_of(&self, i: usize) -> Option<usize> {
        self.dof_of[i]
    }

    /// Artificial discontinuities used by discontinuous rules, per direction.
    pub fn u_disc(&self, dir: usize) -> &[f64] {
        &self.u_disc[dir]
    }

    pub fn count_elements(&self, class: ElementClass) -> usize {
        self.elements.iter().filter(|&&c| c == class).count()
    }

    pub fn count_functions(&self, class: BasisClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }
}

/// Curve samples strictly inside an element that is not cut mean the curve
/// has a piece (or a closed loop) that never crosses an element edge.
fn check_containment(basis: &TensorBasis2D, domain: &TrimmedDomain, elements: &[ElementClass]) -> Result<()> {
    let curve = domain.curve().expect("trimmed");
    let (lo1, hi1) = basis.dirs[0].domain();
    let (lo2, hi2) = basis.dirs[1].domain();
    let ne2 = basis.element_shape().1;
    for (_, p) in curve.samples(CONTAINMENT_SAMPLES) {
        if p[0] <= lo1 || p[0] >= hi1 || p[1] <= lo2 || p[1] >= hi2 {
            continue;
        }
        let e1 = basis.dirs[0].element_of(p[0])?;
        let e2 = basis.dirs[1].element_of(p[1])?;
        if elements[e1 * ne2 + e2] == ElementClass::Cut {
            continue;
        }
        let r = Rect::of_element(basis, e1, e2);
        let gap = (p[0] - r.lo[0]).min(r.hi[0] - p[0]).min(p[1] - r.lo[1]).min(r.hi[1] - p[1]);
        if gap > 1e-12 {
            return Err(Error::UnsupportedTrim(format!(
                "curve point ({:.6}, {:.6}) lies inside element ({e1}, {e2}) without crossing its edges",
                p[0], p[1]
            )));
        }
    }
    Ok(())
}

fn analyse_cut(
    basis: &TensorBasis2D,
    elements: &[ElementClass],
    index: (usize, usize),
    ranges: [Range<usize>; 2],
) -> CutFunction {
    let ne2 = basis.element_shape().1;
    let class = |e1: usize, e2: usize| elements[e1 * ne2 + e2];
    let mut regular = Vec::new();
    let mut trimmed = Vec::new();
    for e1 in ranges[0].clone() {
        for e2 in ranges[1].clone() {
            match class(e1, e2) {
                ElementClass::Interior => regular.push((e1, e2)),
                ElementClass::Cut => trimmed.push((e1, e2)),
                ElementClass::Exterior => {}
            }
        }
    }

    let plan = if regular.is_empty() { None } else { best_box(basis, elements, &ranges, &regular) };
    let mut u_disc: [Vec<f64>; 2] = Default::default();
    if let Some(plan) = &plan {
        for (d, side) in plan.sides.iter().enumerate() {
            if let BoxSide::Split { u_disc: u, .. } = side {
                u_disc[d].push(*u);
            }
        }
    }
    let eligible = regular.is_empty() || plan.is_some();
    CutFunction { index, regular, trimmed, u_disc, eligible, plan }
}

/// Largest all-interior box of the support bounded, per direction, by the
/// support itself or by one knot adjacent to a cut element of the support.
fn best_box(
    basis: &TensorBasis2D,
    elements: &[ElementClass],
    ranges: &[Range<usize>; 2],
    regular: &[(usize, usize)],
) -> Option<DwqPlan> {
    let ne2 = basis.element_shape().1;
    let class = |e1: usize, e2: usize| elements[e1 * ne2 + e2];
    let options = |d: usize| -> Vec<(BoxSide, Range<usize>)> {
        let r = ranges[d].clone();
        let els = basis.dirs[d].elements();
        let mut out = vec![(BoxSide::Full, r.clone())];
        // interior knot between support elements k - 1 and k
        for k in r.start + 1..r.end {
            let touches_cut = ranges[1 - d].clone().any(|o| {
                let (a, b) = if d == 0 { ((k - 1, o), (k, o)) } else { ((o, k - 1), (o, k)) };
                class(a.0, a.1) == ElementClass::Cut || class(b.0, b.1) == ElementClass::Cut
            });
            if touches_cut {
                let u = els[k].lo;
                out.push((BoxSide::Split { u_disc: u, side: Side::Lower }, r.start..k));
                out.push((BoxSide::Split { u_disc: u, side: Side::Upper }, k..r.end));
            }
        }
        out
    };
    let splits = |s: &BoxSide| usize::from(matches!(s, BoxSide::Split { .. }));
    let mut best: Option<(usize, usize, BoxSide, Range<usize>, BoxSide, Range<usize>)> = None;
    let (o1, o2) = (options(0), options(1));
    for (s1, r1) in &o1 {
        for (s2, r2) in &o2 {
            let size = r1.len() * r2.len();
            if size == 0 || !r1.clone().all(|e1| r2.clone().all(|e2| class(e1, e2) == ElementClass::Interior)) {
                continue;
            }
            let n = splits(s1) + splits(s2);
            if best.as_ref().map_or(true, |b| size > b.0 || (size == b.0 && n < b.1)) {
                best = Some((size, n, *s1, r1.clone(), *s2, r2.clone()));
            }
        }
    }
    let (_, _, s1, r1, s2, r2) = best?;
    let rest = regular.iter().copied().filter(|(e1, e2)| !(r1.contains(e1) && r2.contains(e2))).collect();
    Some(DwqPlan { sides: [s1, s2], elements: [r1, r2], rest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trimming::{case_domain, CaseName};

    #[test]
    fn untrimmed_is_all_interior() {
        let b = TensorBasis2D::open_uniform(2, 4).unwrap();
        let c = TrimConfiguration::new(&b, &TrimmedDomain::untrimmed()).unwrap();
        assert_eq!(c.count_elements(ElementClass::Interior), 16);
        assert_eq!(c.count_functions(BasisClass::Interior), 36);
        assert!(c.u_disc(0).is_empty() && c.u_disc(1).is_empty());
        assert_eq!(c.num_dofs(), 36);
    }

    #[test]
    fn line_rows() {
        let b = TensorBasis2D::open_uniform(1, 10).unwrap();
        let c = TrimConfiguration::new(&b, &case_domain(CaseName::Line)).unwrap();
        for e1 in 0..10 {
            for e2 in 0..10 {
                let want = match e2 {
                    0..=2 => ElementClass::Interior,
                    3 => ElementClass::Cut,
                    _ => ElementClass::Exterior,
                };
                assert_eq!(c.element_class(e1, e2), want);
            }
        }
        assert!(c.cut_functions().iter().all(|f| f.eligible));
        assert_eq!(c.u_disc(1), &[0.3]);
        assert!(c.u_disc(0).is_empty());
    }

    #[test]
    fn support_split_partitions_valid_elements() {
        let b = TensorBasis2D::open_uniform(3, 10).unwrap();
        let c = TrimConfiguration::new(&b, &case_domain(CaseName::Circle)).unwrap();
        for f in c.cut_functions() {
            let r1 = b.dirs[0].support_elements(f.index.0);
            let r2 = b.dirs[1].support_elements(f.index.1);
            let valid = r1
                .flat_map(|e1| r2.clone().map(move |e2| (e1, e2)))
                .filter(|&(e1, e2)| c.element_class(e1, e2) != ElementClass::Exterior)
                .count();
            assert_eq!(f.regular.len() + f.trimmed.len(), valid);
            if let Some(plan) = &f.plan {
                let boxed = plan.elements[0].len() * plan.elements[1].len();
                assert_eq!(boxed + plan.rest.len(), f.regular.len());
            }
        }
    }

    #[test]
    fn hidden_curve_is_unsupported() {
        use crate::trimming::TrimmingCurve;
        // small circle strictly inside one element
        let curve = TrimmingCurve::arc([0.55, 0.55], 0.02, 0.0, 2.0 * std::f64::consts::PI);
        let b = TensorBasis2D::open_uniform(1, 4).unwrap();
        let err = TrimConfiguration::new(&b, &TrimmedDomain::trimmed(curve)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedTrim(_)));
    }
}
