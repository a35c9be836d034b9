use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::classify::TrimConfiguration;
use super::curve::{cross, sub, AxisSegment, Point, PointClass, TrimmingCurve};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_lobatto_nodes, GaussRule};
use crate::splinecore::TensorBasis2D;

/// Highest Lagrange degree of curved sub-cell edges.
pub const MAX_CELL_DEGREE: usize = 6;

/// Depth of the recursive 4-way split of an integration cell.
pub const MAX_SPLIT_DEPTH: usize = 4;

/// Corner snapping distance, relative to the cell size.
pub const SNAP_TOL: f64 = 1e-10;

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub lo: Point,
    pub hi: Point,
}

impl Rect {
    pub fn of_element(basis: &TensorBasis2D, e1: usize, e2: usize) -> Self {
        let a = basis.dirs[0].elements()[e1];
        let b = basis.dirs[1].elements()[e2];
        Rect { lo: [a.lo, b.lo], hi: [a.hi, b.hi] }
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.lo[0] + self.hi[0]), 0.5 * (self.lo[1] + self.hi[1])]
    }

    pub fn size(&self) -> f64 {
        (self.hi[0] - self.lo[0]).max(self.hi[1] - self.lo[1])
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    /// Corners counter-clockwise from `lo`.
    pub fn corner(&self, k: usize) -> Point {
        match k % 4 {
            0 => self.lo,
            1 => [self.hi[0], self.lo[1]],
            2 => self.hi,
            _ => [self.lo[0], self.hi[1]],
        }
    }

    /// Point at perimeter coordinate `s` in `[0, 4)`; each edge has length
    /// one, counter-clockwise from `lo`.
    pub fn perimeter_point(&self, s: f64) -> Point {
        let s = s.rem_euclid(4.0);
        let k = (s.floor() as usize).min(3);
        let f = s - k as f64;
        let (a, b) = (self.corner(k), self.corner(k + 1));
        [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
    }

    fn edges(&self) -> [AxisSegment; 4] {
        [
            AxisSegment { axis: 1, value: self.lo[1], lo: self.lo[0], hi: self.hi[0] },
            AxisSegment { axis: 0, value: self.hi[0], lo: self.lo[1], hi: self.hi[1] },
            AxisSegment { axis: 1, value: self.hi[1], lo: self.lo[0], hi: self.hi[0] },
            AxisSegment { axis: 0, value: self.lo[0], lo: self.lo[1], hi: self.hi[1] },
        ]
    }

    fn quarters(&self) -> [Rect; 4] {
        let c = self.center();
        [
            Rect { lo: self.lo, hi: c },
            Rect { lo: [c[0], self.lo[1]], hi: [self.hi[0], c[1]] },
            Rect { lo: c, hi: self.hi },
            Rect { lo: [self.lo[0], c[1]], hi: [c[0], self.hi[1]] },
        ]
    }
}

/// A transversal crossing of the curve with a cell boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BoundaryHit {
    /// Perimeter coordinate.
    pub s: f64,
    pub point: Point,
    /// Curve parameter.
    pub t: f64,
}

/// Distinct transversal crossings of the curve with the boundary of `rect`,
/// sorted by perimeter coordinate. Crossings near a corner snap to it.
pub(crate) fn boundary_hits(curve: &TrimmingCurve, rect: &Rect) -> Vec<BoundaryHit> {
    let (w, h) = (rect.hi[0] - rect.lo[0], rect.hi[1] - rect.lo[1]);
    let snap = SNAP_TOL * rect.size();
    let mut hits = Vec::new();
    for (k, edge) in rect.edges().iter().enumerate() {
        for hit in curve.intersect_edge(edge) {
            if hit.tangential {
                continue;
            }
            let mut point = edge.point(hit.coord);
            let mut s = match k {
                0 => (point[0] - rect.lo[0]) / w,
                1 => 1.0 + (point[1] - rect.lo[1]) / h,
                2 => 2.0 + (rect.hi[0] - point[0]) / w,
                _ => 3.0 + (rect.hi[1] - point[1]) / h,
            };
            for c in 0..4 {
                let cp = rect.corner(c);
                if (cp[0] - point[0]).hypot(cp[1] - point[1]) <= snap {
                    point = cp;
                    s = c as f64;
                }
            }
            hits.push(BoundaryHit { s: s.clamp(0.0, 4.0) % 4.0, point, t: hit.t });
        }
    }
    hits.sort_by(|a, b| a.s.total_cmp(&b.s));
    hits.dedup_by(|b, a| (a.s - b.s).abs() <= 1e-12);
    if hits.len() > 1 && hits[0].s + 4.0 - hits[hits.len() - 1].s <= 1e-12 {
        hits.pop();
    }
    hits
}

/// The curve runs through the open interior of `rect` between two of its
/// boundary hits. A curve lying along an edge hits the corners but does not
/// cut the element.
pub(crate) fn crosses_interior(curve: &TrimmingCurve, rect: &Rect, hits: &[BoundaryHit]) -> bool {
    let snap = SNAP_TOL * rect.size();
    let mut ts: Vec<f64> = hits.iter().map(|h| h.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.windows(2).any(|w| {
        let x = curve.eval(0.5 * (w[0] + w[1]));
        (0..2).all(|d| x[d] > rect.lo[d] + snap && x[d] < rect.hi[d] - snap)
    })
}

/// One edge of a sub-cell, traversed counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub enum CellEdge {
    /// Collapsed edge.
    Point(Point),
    Segment(Point, Point),
    /// Lagrange interpolant of the trimming curve through Gauss–Lobatto
    /// samples; `nodes` lie in `[0, 1]`.
    Curve { nodes: Vec<f64>, points: Vec<Point> },
}

impl CellEdge {
    fn eval(&self, s: f64) -> (Point, Point) {
        match self {
            CellEdge::Point(p) => (*p, [0.0, 0.0]),
            CellEdge::Segment(a, b) => {
                let d = sub(*b, *a);
                ([a[0] + s * d[0], a[1] + s * d[1]], d)
            }
            CellEdge::Curve { nodes, points } => {
                let n = nodes.len();
                let mut p = [0.0; 2];
                let mut dp = [0.0; 2];
                for j in 0..n {
                    let mut l = 1.0;
                    let mut dl = 0.0;
                    for m in 0..n {
                        if m == j {
                            continue;
                        }
                        let den = nodes[j] - nodes[m];
                        dl = dl * (s - nodes[m]) / den + l / den;
                        l *= (s - nodes[m]) / den;
                    }
                    p[0] += l * points[j][0];
                    p[1] += l * points[j][1];
                    dp[0] += dl * points[j][0];
                    dp[1] += dl * points[j][1];
                }
                (p, dp)
            }
        }
    }

    fn start(&self) -> Point {
        self.eval(0.0).0
    }
}

/// A mapped quadrilateral (or triangle, with a collapsed edge) bounded by
/// four counter-clockwise edges, parametrized by transfinite blending.
#[derive(Debug, Clone, PartialEq)]
pub struct SubCell {
    pub edges: [CellEdge; 4],
}

impl SubCell {
    fn rect(r: &Rect) -> Self {
        let c: Vec<Point> = (0..4).map(|k| r.corner(k)).collect();
        SubCell {
            edges: [
                CellEdge::Segment(c[0], c[1]),
                CellEdge::Segment(c[1], c[2]),
                CellEdge::Segment(c[2], c[3]),
                CellEdge::Segment(c[3], c[0]),
            ],
        }
    }

    /// Image point and Jacobian determinant at `(s, t)` in the unit square.
    pub fn map(&self, s: f64, t: f64) -> (Point, f64) {
        let (b, db) = self.edges[0].eval(s);
        let (r, dr) = self.edges[1].eval(t);
        let (top, dtop) = self.edges[2].eval(1.0 - s);
        let (l, dl) = self.edges[3].eval(1.0 - t);
        let p00 = self.edges[0].start();
        let p10 = self.edges[1].start();
        let p11 = self.edges[2].start();
        let p01 = self.edges[3].start();
        let mut x = [0.0; 2];
        let mut xs = [0.0; 2];
        let mut xt = [0.0; 2];
        for d in 0..2 {
            x[d] = (1.0 - t) * b[d] + t * top[d] + (1.0 - s) * l[d] + s * r[d]
                - ((1.0 - s) * (1.0 - t) * p00[d] + s * (1.0 - t) * p10[d] + (1.0 - s) * t * p01[d] + s * t * p11[d]);
            xs[d] = (1.0 - t) * db[d] - t * dtop[d] - l[d] + r[d]
                - (-(1.0 - t) * p00[d] + (1.0 - t) * p10[d] - t * p01[d] + t * p11[d]);
            xt[d] = -b[d] + top[d] - (1.0 - s) * dl[d] + s * dr[d]
                - (-(1.0 - s) * p00[d] - s * p10[d] + (1.0 - s) * p01[d] + s * p11[d]);
        }
        (x, cross(xs, xt))
    }

    /// Tensor Gauss rule with `n` points per direction mapped into the cell.
    pub fn quadrature(&self, rule: &GaussRule, points: &mut Vec<Point>, weights: &mut Vec<f64>) -> std::result::Result<(), f64> {
        for (s, ws) in rule.mapped(0.0, 1.0) {
            for (t, wt) in rule.mapped(0.0, 1.0) {
                let (x, det) = self.map(s, t);
                if det <= 0.0 {
                    return Err(det);
                }
                points.push(x);
                weights.push(ws * wt * det);
            }
        }
        Ok(())
    }
}

enum Failure {
    Chains,
    Corners(usize),
    Jacobian(f64),
}

/// Splits the valid part of a cut element into sub-cells with at most one
/// curved edge each. The curved edges interpolate the trimming curve at
/// `q + 1` Gauss–Lobatto samples.
pub fn decompose_cut_element(
    curve: &TrimmingCurve,
    rect: &Rect,
    q: usize,
    element: (usize, usize),
) -> Result<Vec<SubCell>> {
    if q == 0 || q > MAX_CELL_DEGREE {
        return Err(Error::Config(format!("cut-cell degree {q} outside 1..={MAX_CELL_DEGREE}")));
    }
    let check = GaussRule::new(q + 3)?;
    let mut out = Vec::new();
    decompose_into(curve, rect, q, &check, 0, element, &mut out)?;
    Ok(out)
}

fn decompose_into(
    curve: &TrimmingCurve,
    rect: &Rect,
    q: usize,
    check: &GaussRule,
    depth: usize,
    element: (usize, usize),
    out: &mut Vec<SubCell>,
) -> Result<()> {
    let hits = boundary_hits(curve, rect);
    if hits.len() < 2 || !crosses_interior(curve, rect, &hits) {
        if curve.classify(rect.center()) == PointClass::Inside {
            out.push(SubCell::rect(rect));
        }
        return Ok(());
    }
    let failure = if hits.len() == 2 {
        match two_hit_cells(curve, rect, q, check, hits[0], hits[1]) {
            Ok(cells) => {
                out.extend(cells);
                return Ok(());
            }
            Err(f) => f,
        }
    } else {
        Failure::Corners(hits.len())
    };
    if depth >= MAX_SPLIT_DEPTH {
        return Err(match failure {
            Failure::Jacobian(det) => Error::NegativeJacobian { element, det },
            Failure::Chains => Error::Decomposition { element, reason: "no consistent valid boundary chain".into() },
            Failure::Corners(n) => Error::Decomposition {
                element,
                reason: format!("{n} boundary intersections or corners remain at split depth {MAX_SPLIT_DEPTH}"),
            },
        });
    }
    for quarter in rect.quarters() {
        decompose_into(curve, &quarter, q, check, depth + 1, element, out)?;
    }
    Ok(())
}

fn two_hit_cells(
    curve: &TrimmingCurve,
    rect: &Rect,
    q: usize,
    check: &GaussRule,
    a: BoundaryHit,
    b: BoundaryHit,
) -> std::result::Result<Vec<SubCell>, Failure> {
    let inside = |s: f64| curve.classify(rect.perimeter_point(s)) == PointClass::Inside;
    let first = inside(0.5 * (a.s + b.s));
    let second = inside(0.5 * (b.s + a.s + 4.0));
    // valid chain runs counter-clockwise from `start` to `end`
    let (start, end, s_end) = match (first, second) {
        (true, false) => (a, b, b.s),
        (false, true) => (b, a, a.s + 4.0),
        _ => return Err(Failure::Chains),
    };
    let corners: Vec<Point> = (1..8)
        .map(|k| k as f64)
        .filter(|&k| k > start.s && k < s_end)
        .map(|k| rect.corner(k as usize))
        .collect();

    let nodes: Vec<f64> = gauss_lobatto_nodes(q).iter().map(|x| 0.5 * (x + 1.0)).collect();
    let mut points: Vec<Point> = nodes.iter().map(|&s| curve.eval(end.t + s * (start.t - end.t))).collect();
    points[0] = end.point;
    points[q] = start.point;
    let arc = CellEdge::Curve { nodes, points };
    let seg = |p: Point, q: Point| CellEdge::Segment(p, q);
    let (ps, pe) = (start.point, end.point);

    let cells = match corners.as_slice() {
        [] => vec![SubCell { edges: [seg(ps, pe), CellEdge::Point(pe), arc, CellEdge::Point(ps)] }],
        [c1] => vec![SubCell { edges: [seg(ps, *c1), seg(*c1, pe), arc, CellEdge::Point(ps)] }],
        [c1, c2] => vec![SubCell { edges: [seg(ps, *c1), seg(*c1, *c2), seg(*c2, pe), arc] }],
        [c1, c2, c3] => vec![
            SubCell { edges: [seg(ps, *c1), seg(*c1, *c2), seg(*c2, ps), CellEdge::Point(ps)] },
            SubCell { edges: [seg(*c2, *c3), seg(*c3, pe), arc, seg(ps, *c2)] },
        ],
        _ => return Err(Failure::Corners(corners.len())),
    };
    for cell in &cells {
        for &s in &check.points {
            for &t in &check.points {
                let det = cell.map(0.5 * (s + 1.0), 0.5 * (t + 1.0)).1;
                if det <= 0.0 {
                    return Err(Failure::Jacobian(det));
                }
            }
        }
    }
    Ok(cells)
}

/// Quadrature points and weights of one cut element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutElementRule {
    pub element: (usize, usize),
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub sub_cells: usize,
}

impl CutElementRule {
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Quadrature on the valid part of every cut element.
#[derive(Debug, Clone)]
pub struct CutCellQuadrature {
    q: usize,
    gauss_points: usize,
    rules: Vec<CutElementRule>,
    index: HashMap<(usize, usize), usize>,
}

impl CutCellQuadrature {
    /// Sub-cells of degree `q` with `(q + 1)^2` Gauss points each.
    pub fn new(config: &TrimConfiguration, q: usize, parallel: bool) -> Result<Self> {
        Self::with_points(config, q, q + 1, parallel)
    }

    /// Sub-cells of degree `q` with `n^2` Gauss points each.
    pub fn with_points(config: &TrimConfiguration, q: usize, n: usize, parallel: bool) -> Result<Self> {
        let rule = GaussRule::new(n)?;
        let cut = config.cut_elements();
        let build = |&(e1, e2): &(usize, usize)| -> Result<CutElementRule> {
            let curve = config.domain().curve().expect("cut elements need a curve");
            let rect = Rect::of_element(config.basis(), e1, e2);
            let cells = decompose_cut_element(curve, &rect, q, (e1, e2))?;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for cell in &cells {
                cell.quadrature(&rule, &mut points, &mut weights)
                    .map_err(|det| Error::NegativeJacobian { element: (e1, e2), det })?;
            }
            Ok(CutElementRule { element: (e1, e2), points, weights, sub_cells: cells.len() })
        };
        let rules: Vec<CutElementRule> = if parallel {
            cut.par_iter().map(build).collect::<Result<_>>()?
        } else {
            cut.iter().map(build).collect::<Result<_>>()?
        };
        let index = rules.iter().enumerate().map(|(k, r)| (r.element, k)).collect();
        Ok(CutCellQuadrature { q, gauss_points: n, rules, index })
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    pub fn gauss_points(&self) -> usize {
        self.gauss_points
    }

    pub fn rules(&self) -> &[CutElementRule] {
        &self.rules
    }

    pub fn rule(&self, e1: usize, e2: usize) -> Option<&CutElementRule> {
        self.index.get(&(e1, e2)).map(|&k| &self.rules[k])
    }

    pub fn num_points(&self) -> usize {
        self.rules.iter().map(|r| r.points.len()).sum()
    }

    /// Writes `e1,e2,u1,u2,weight` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "e1,e2,u1,u2,weight")?;
        for r in &self.rules {
            for (p, wt) in r.points.iter().zip(&r.weights) {
                writeln!(w, "{},{},{:.17e},{:.17e},{:.17e}", r.element.0, r.element.1, p[0], p[1], wt)?;
            }
        }
        Ok(())
    }
}
