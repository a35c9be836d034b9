use std::f64::consts::PI;

/// A point of the parameter plane.
pub type Point = [f64; 2];

/// Distance below which a point counts as lying on the curve.
pub const ON_CURVE_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Side of the trimming curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Inside,
    Outside,
}

/// Geometry of a trimming curve; parameter `t` runs over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveKind {
    /// Straight segment from `a` to `b`.
    Line { a: Point, b: Point },
    /// Circular arc; counter-clockwise when `theta1 > theta0`.
    Arc { center: Point, radius: f64, theta0: f64, theta1: f64 },
    /// Cubic Bézier curve. `closing` is a polyline from the curve end back to
    /// its start that runs around the excluded region, outside the
    /// parameter domain; it turns the curve into a loop for ray casting.
    CubicBezier { ctrl: [Point; 4], closing: Vec<Point> },
}

/// An oriented trimming curve. The valid domain lies to its left.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmingCurve {
    pub kind: CurveKind,
}

/// An axis-aligned segment: coordinate `axis` is fixed at `value`, the other
/// coordinate runs over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSegment {
    pub axis: usize,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl AxisSegment {
    pub fn point(&self, along: f64) -> Point {
        if self.axis == 0 {
            [self.value, along]
        } else {
            [along, self.value]
        }
    }
}

/// Intersection of the curve with an axis-aligned segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeHit {
    /// Curve parameter.
    pub t: f64,
    /// Coordinate along the segment.
    pub coord: f64,
    /// The curve touches the segment without crossing it.
    pub tangential: bool,
}

/// Root of `f` on `[a, b]` where `f(a)` and `f(b)` have opposite signs:
/// Newton steps safeguarded by bisection.
pub(crate) fn bracketed_root(f: impl Fn(f64) -> (f64, f64), mut a: f64, mut b: f64) -> f64 {
    let (mut fa, _) = f(a);
    if fa == 0.0 {
        return a;
    }
    if f(b).0 == 0.0 {
        return b;
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 || fx.abs() <= 1e-15 && (b - a) <= 1e-14 {
            return x;
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let newton = x - fx / dfx;
        x = if dfx != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if b - a <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return x;
        }
    }
    x
}

impl TrimmingCurve {
    pub fn line(a: Point, b: Point) -> Self {
        TrimmingCurve { kind: CurveKind::Line { a, b } }
    }

    pub fn arc(center: Point, radius: f64, theta0: f64, theta1: f64) -> Self {
        TrimmingCurve { kind: CurveKind::Arc { center, radius, theta0, theta1 } }
    }

    pub fn cubic_bezier(ctrl: [Point; 4], closing: Vec<Point>) -> Self {
        TrimmingCurve { kind: CurveKind::CubicBezier { ctrl, closing } }
    }

    pub fn eval(&self, t: f64) -> Point {
        match &self.kind {
            CurveKind::Line { a, b } => [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
            CurveKind::Arc { center, radius, theta0, theta1 } => {
                let th = theta0 + t * (theta1 - theta0);
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            }
            CurveKind::CubicBezier { ctrl, .. } => {
                let s = 1.0 - t;
                let c = [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t];
                let mut p = [0.0; 2];
                for (w, q) in c.iter().zip(ctrl) {
                    p[0] += w * q[0];
                    p[1] += w * q[1];
                }
                p
            }
        }
    }

    pub fn deriv(&self, t: f64) -> Point {
        match &self.kind {
            CurveKind::Line { a, b } => sub(*b, *a),
            CurveKind::Arc { radius, theta0, theta1, .. } => {
                let th = theta0 + t * (theta1 - theta0);
                let d = theta1 - theta0;
                [-radius * th.sin() * d, radius * th.cos() * d]
            }
            CurveKind::CubicBezier { ctrl, .. } => {
                let s = 1.0 - t;
                let c = [3.0 * s * s, 6.0 * s * t, 3.0 * t * t];
                let mut p = [0.0; 2];
                for k in 0..3 {
                    let d = sub(ctrl[k + 1], ctrl[k]);
                    p[0] += c[k] * d[0];
                    p[1] += c[k] * d[1];
                }
                p
            }
        }
    }

    /// Parameter of the curve point nearest to `p` (global search by
    /// sampling, then Newton on the distance).
    pub fn nearest(&self, p: Point) -> (f64, f64) {
        let n = 256;
        let mut best = (0.0, f64::INFINITY);
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let d = norm(sub(self.eval(t), p));
            if d < best.1 {
                best = (t, d);
            }
        }
        let mut t = best.0;
        let h = 1e-7;
        for _ in 0..30 {
            let r = sub(self.eval(t), p);
            let d1 = self.deriv(t);
            let g = r[0] * d1[0] + r[1] * d1[1];
            let d2 = sub(self.deriv((t + h).min(1.0)), self.deriv((t - h).max(0.0)));
            let dt2 = (t + h).min(1.0) - (t - h).max(0.0);
            let gp = d1[0] * d1[0] + d1[1] * d1[1] + (r[0] * d2[0] + r[1] * d2[1]) / dt2;
            if gp <= 0.0 {
                break;
            }
            let next = (t - g / gp).clamp(0.0, 1.0);
            if (next - t).abs() < 1e-15 {
                t = next;
                break;
            }
            t = next;
        }
        let d = norm(sub(self.eval(t), p));
        if d < best.1 {
            (t, d)
        } else {
            best
        }
    }

    /// Inside/outside of the valid domain. Points within [`ON_CURVE_TOL`] of
    /// the curve are decided by the side of the nearest tangent; points on
    /// the tangent itself count as inside.
    pub fn classify(&self, p: Point) -> PointClass {
        let side = |v: f64| if v >= 0.0 { PointClass::Inside } else { PointClass::Outside };
        match &self.kind {
            CurveKind::Line { a, b } => {
                let d = sub(*b, *a);
                side(cross(d, sub(p, *a)) / norm(d))
            }
            CurveKind::Arc { center, radius, theta0, theta1 } => {
                let r = norm(sub(p, *center));
                let ccw = theta1 > theta0;
                let inside = if ccw { radius - r } else { r - radius };
                side(inside)
            }
            CurveKind::CubicBezier { closing, .. } => {
                let (t, d) = self.nearest(p);
                if d <= ON_CURVE_TOL {
                    return side(cross(self.deriv(t), sub(p, self.eval(t))));
                }
                // the loop (curve + closing polyline) encloses the excluded side
                let crossings = self.ray_crossings(p) + polyline_crossings(closing, p);
                if crossings % 2 == 1 {
                    PointClass::Outside
                } else {
                    PointClass::Inside
                }
            }
        }
    }

    /// Crossings of the ray `{(x, p.y): x > p.x}` with the curve, using the
    /// half-open convention `y > p.y` shared with the closing polyline.
    fn ray_crossings(&self, p: Point) -> usize {
        let hits = self.level_set_crossings(1, p[1]);
        hits.iter().filter(|&&t| self.eval(t)[0] > p[0]).count()
    }

    /// Parameters where `gamma_axis(t)` changes between `<= value` and
    /// `> value`.
    fn level_set_crossings(&self, axis: usize, value: f64) -> Vec<f64> {
        let pieces = self.monotone_pieces(axis);
        let above = |t: f64| self.eval(t)[axis] > value;
        let mut out = Vec::new();
        for w in pieces.windows(2) {
            let (a, b) = (w[0], w[1]);
            if above(a) != above(b) {
                let f = |t: f64| (self.eval(t)[axis] - value, self.deriv(t)[axis]);
                out.push(bracketed_root(f, a, b));
            }
        }
        out
    }

    /// Breakpoints of `[0, 1]` between which `gamma_axis` is monotone.
    fn monotone_pieces(&self, axis: usize) -> Vec<f64> {
        let mut ts = vec![0.0];
        match &self.kind {
            CurveKind::Line { .. } => {}
            CurveKind::Arc { theta0, theta1, .. } => {
                // extrema of cos / sin at multiples of pi (+ pi/2 for cos)
                let off = if axis == 0 { 0.0 } else { PI / 2.0 };
                let (lo, hi) = (theta0.min(*theta1), theta0.max(*theta1));
                let mut k = ((lo - off) / PI).ceil();
                while off + k * PI < hi {
                    let th = off + k * PI;
                    ts.push((th - theta0) / (theta1 - theta0));
                    k += 1.0;
                }
            }
            CurveKind::CubicBezier { ctrl, .. } => {
                // derivative is quadratic in Bernstein form
                let d: Vec<f64> = (0..3).map(|k| 3.0 * (ctrl[k + 1][axis] - ctrl[k][axis])).collect();
                let (a, b, c) = (d[0] - 2.0 * d[1] + d[2], 2.0 * (d[1] - d[0]), d[0]);
                let mut roots = Vec::new();
                if a.abs() < 1e-14 {
                    if b.abs() > 1e-14 {
                        roots.push(-c / b);
                    }
                } else {
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        roots.push((-b - sq) / (2.0 * a));
                        roots.push((-b + sq) / (2.0 * a));
                    }
                }
                ts.extend(roots.into_iter().filter(|&t| t > 0.0 && t < 1.0));
            }
        }
        ts.push(1.0);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    /// All intersections with an axis-aligned segment. Transversal crossings
    /// are refined to a residual of `1e-12` or better; touches where the curve
    /// reaches the line without crossing are flagged `tangential`.
    pub fn intersect_edge(&self, seg: &AxisSegment) -> Vec<EdgeHit> {
        let ax = seg.axis;
        let other = 1 - ax;
        let tol = 1e-12;
        let mut hits = Vec::new();
        let push = |t: f64, tangential: bool, hits: &mut Vec<EdgeHit>| {
            let c = self.eval(t)[other];
            if c >= seg.lo - tol && c <= seg.hi + tol {
                hits.push(EdgeHit { t, coord: c.clamp(seg.lo, seg.hi), tangential });
            }
        };
        match &self.kind {
            CurveKind::Line { a, b } => {
                let den = b[ax] - a[ax];
                if den != 0.0 {
                    let t = (seg.value - a[ax]) / den;
                    if (0.0..=1.0).contains(&t) {
                        push(t, false, &mut hits);
                    }
                }
            }
            _ => {
                let pieces = self.monotone_pieces(ax);
                let g = |t: f64| self.eval(t)[ax] - seg.value;
                for w in pieces.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (ga, gb) = (g(a), g(b));
                    if ga == 0.0 {
                        continue;
                    }
                    if gb == 0.0 || (ga < 0.0) != (gb < 0.0) {
                        let t = if gb == 0.0 {
                            b
                        } else {
                            bracketed_root(|t| (g(t), self.deriv(t)[ax]), a, b)
                        };
                        let interior_break = t > 0.0 && t < 1.0 && pieces.contains(&t);
                        push(t, interior_break && self.deriv(t)[ax].abs() < 1e-12, &mut hits);
                    }
                }
                // touches at interior extrema that do not change sign
                for &t in &pieces[1..pieces.len() - 1] {
                    let gt = g(t);
                    if gt.abs() <= tol && gt != 0.0 {
                        push(t, true, &mut hits);
                    }
                }
                if g(0.0) == 0.0 {
                    push(0.0, false, &mut hits);
                }
            }
        }
        hits.sort_by(|a, b| a.t.total_cmp(&b.t));
        hits
    }

    /// Samples used for containment checks and plotting.
    pub fn samples(&self, n: usize) -> Vec<(f64, Point)> {
        (0..=n).map(|k| k as f64 / n as f64).map(|t| (t, self.eval(t))).collect()
    }
}

/// Crossings of the ray `{(x, p.y): x > p.x}` with an open polyline.
fn polyline_crossings(poly: &[Point], p: Point) -> usize {
    poly.windows(2)
        .filter(|w| {
            let (a, b) = (w[0], w[1]);
            if (a[1] > p[1]) == (b[1] > p[1]) {
                return false;
            }
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            x > p[0]
        })
        .count()
}
