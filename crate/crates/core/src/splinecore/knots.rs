use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when deciding whether two knot values coincide.
pub const KNOT_TOL: f64 = 1e-12;

/// An open (clamped) knot vector together with its polynomial degree.
///
/// Serialized as `{"degree": p, "knots": [...]}`; deserialization validates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKnotVector", into = "RawKnotVector")]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

#[derive(Serialize, Deserialize)]
struct RawKnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl TryFrom<RawKnotVector> for KnotVector {
    type Error = Error;
    fn try_from(raw: RawKnotVector) -> Result<Self> {
        KnotVector::new(raw.knots, raw.degree)
    }
}

impl From<KnotVector> for RawKnotVector {
    fn from(kv: KnotVector) -> Self {
        RawKnotVector { degree: kv.degree, knots: kv.knots }
    }
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::InvalidKnotVector(format!(
                "{} knots cannot hold an open knot vector of degree {p}",
                knots.len()
            )));
        }
        if knots.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidKnotVector("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidKnotVector("knots must be non-decreasing".into()));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if last <= first {
            return Err(Error::InvalidKnotVector("empty parametric domain".into()));
        }
        let kv = KnotVector { knots, degree };
        if kv.multiplicity(first) != p + 1 || kv.multiplicity(last) != p + 1 {
            return Err(Error::InvalidKnotVector(format!(
                "end knots must have multiplicity exactly p + 1 = {}",
                p + 1
            )));
        }
        for u in kv.breakpoints() {
            let m = kv.multiplicity(u);
            if m > p + 1 {
                return Err(Error::InvalidKnotVector(format!(
                    "knot {u} has multiplicity {m} > p + 1"
                )));
            }
        }
        Ok(kv)
    }

    /// Open uniform knot vector with `elements` equal elements on `[0, 1]`.
    pub fn open_uniform(degree: usize, elements: usize) -> Result<Self> {
        Self::open_uniform_on(degree, elements, 0.0, 1.0)
    }

    pub fn open_uniform_on(degree: usize, elements: usize, a: f64, b: f64) -> Result<Self> {
        if elements == 0 {
            return Err(Error::InvalidKnotVector("at least one element required".into()));
        }
        let mut knots = vec![a; degree + 1];
        for e in 1..elements {
            knots.push(a + (b - a) * e as f64 / elements as f64);
        }
        knots.extend(std::iter::repeat(b).take(degree + 1));
        Self::new(knots, degree)
    }

    /// Builds a knot vector from distinct breakpoints and their interior
    /// multiplicities; the end breakpoints are clamped.
    pub fn from_breakpoints(degree: usize, breaks: &[f64], interior_mult: &[usize]) -> Result<Self> {
        if breaks.len() < 2 || interior_mult.len() + 2 != breaks.len() {
            return Err(Error::InvalidKnotVector(
                "need n breakpoints and n - 2 interior multiplicities".into(),
            ));
        }
        let mut knots = vec![breaks[0]; degree + 1];
        for (u, &m) in breaks[1..breaks.len() - 1].iter().zip(interior_mult) {
            knots.extend(std::iter::repeat(*u).take(m));
        }
        knots.extend(std::iter::repeat(breaks[breaks.len() - 1]).take(degree + 1));
        Self::new(knots, degree)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.knots[0]
    }

    pub fn last(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &u in &self.knots {
            match out.last() {
                Some(&v) if (u - v).abs() <= KNOT_TOL => {}
                _ => out.push(u),
            }
        }
        out
    }

    pub fn multiplicity(&self, u: f64) -> usize {
        self.knots.iter().filter(|&&k| (k - u).abs() <= KNOT_TOL).count()
    }

    /// Returns the existing knot value within [`KNOT_TOL`] of `u`, if any.
    pub fn snap(&self, u: f64) -> Option<f64> {
        self.knots.iter().copied().find(|k| (k - u).abs() <= KNOT_TOL)
    }

    /// Span index `l` with `u` in `[u_l, u_{l+1})`; the last non-empty span
    /// is closed on the right.
    pub fn find_span(&self, u: f64) -> Result<usize> {
        let (lo, hi) = (self.first(), self.last());
        if !(lo..=hi).contains(&u) {
            return Err(Error::Domain { u, lo, hi });
        }
        let n = self.num_basis();
        if u >= self.knots[n] {
            return Ok(n - 1);
        }
        // largest l in [p, n-1] with knots[l] <= u
        let (mut low, mut high) = (self.degree, n);
        while high - low > 1 {
            let mid = (low + high) / 2;
            if self.knots[mid] <= u {
                low = mid;
            } else {
                high = mid;
            }
        }
        Ok(low)
    }

    /// Knot vector with one more copy of `u` (snapped to an existing knot
    /// within [`KNOT_TOL`]).
    pub fn with_inserted(&self, u: f64) -> Result<(Self, f64)> {
        let u = self.snap(u).unwrap_or(u);
        if u <= self.first() || u >= self.last() {
            return Err(Error::Multiplicity { u, m: self.degree + 1, p: self.degree });
        }
        let m = self.multiplicity(u);
        if m >= self.degree + 1 {
            return Err(Error::Multiplicity { u, m, p: self.degree });
        }
        let pos = self.knots.partition_point(|&k| k <= u);
        let mut knots = self.knots.clone();
        knots.insert(pos, u);
        Ok((KnotVector { knots, degree: self.degree }, u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn find_span_examples() {
        let kv = KnotVector::new(vec![0.0, 0.0, 1.0, 2.0, 2.0], 1).unwrap();
        assert_eq!(kv.find_span(0.5).unwrap(), 1);
        assert_eq!(kv.find_span(2.0).unwrap(), 2);
        assert_eq!(kv.find_span(1.0).unwrap(), 2);
        let kv = KnotVector::new(vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0], 2).unwrap();
        // scan oracle
        let scan = |u: f64| {
            (0..kv.len() - 1)
                .filter(|&l| kv.knots()[l] < kv.knots()[l + 1])
                .find(|&l| kv.knots()[l] <= u && u < kv.knots()[l + 1])
        };
        assert_eq!(scan(0.5), Some(3));
        assert_eq!(kv.find_span(0.5).unwrap(), 3);
    }

    #[test]
    fn outside_domain_is_an_error() {
        let kv = KnotVector::open_uniform(2, 4).unwrap();
        assert!(matches!(kv.find_span(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(kv.find_span(1.0 + 1e-9), Err(Error::Domain { .. })));
    }

    #[test]
    fn rejects_invalid_vectors() {
        assert!(KnotVector::new(vec![0.0, 1.0, 0.5, 1.0], 1).is_err());
        assert!(KnotVector::new(vec![0.0, 0.5, 1.0, 1.0], 1).is_err());
        assert!(KnotVector::new(vec![0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0], 1).is_err());
        assert!(KnotVector::new(vec![0.0, 0.0, 0.5, 0.5, 1.0, 1.0], 1).is_ok());
    }

    #[test]
    fn json_round_trip_validates() {
        let kv = KnotVector::open_uniform(2, 3).unwrap();
        let s = serde_json::to_string(&kv).unwrap();
        assert!(s.contains("\"degree\":2"));
        let back: KnotVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, kv);
        let bad = r#"{"degree": 2, "knots": [0, 0, 1, 1]}"#;
        assert!(serde_json::from_str::<KnotVector>(bad).is_err());
    }

    #[test]
    fn insertion_bookkeeping() {
        let kv = KnotVector::from_breakpoints(2, &[0.0, 0.5, 1.0], &[1]).unwrap();
        let (kv2, u) = kv.with_inserted(0.5 + 1e-14).unwrap();
        assert_eq!(u, 0.5);
        assert_eq!(kv2.multiplicity(0.5), 2);
        let (kv3, _) = kv2.with_inserted(0.5).unwrap();
        assert_eq!(kv3.multiplicity(0.5), 3);
        assert!(matches!(kv3.with_inserted(0.5), Err(Error::Multiplicity { m: 3, .. })));
    }
}
