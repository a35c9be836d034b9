use std::ops::{Range, RangeInclusive};

use super::knots::KnotVector;
use crate::error::{Error, Result};

/// Largest degree supported by the stack-allocated evaluation scratch space.
pub const MAX_DEGREE: usize = 30;

/// A non-empty knot span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element1D {
    pub span: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Element1D {
    pub fn size(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains_open(&self, u: f64) -> bool {
        u > self.lo && u < self.hi
    }
}

/// The full set of B-splines of one knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis1D {
    kv: KnotVector,
    elements: Vec<Element1D>,
    span_element: Vec<Option<usize>>,
}

impl Basis1D {
    pub fn new(kv: KnotVector) -> Result<Self> {
        if kv.degree() > MAX_DEGREE {
            return Err(Error::InvalidKnotVector(format!("degree above {MAX_DEGREE}")));
        }
        let k = kv.knots();
        let mut elements = Vec::new();
        let mut span_element = vec![None; k.len() - 1];
        for l in 0..k.len() - 1 {
            if k[l] < k[l + 1] {
                span_element[l] = Some(elements.len());
                elements.push(Element1D { span: l, lo: k[l], hi: k[l + 1] });
            }
        }
        Ok(Basis1D { kv, elements, span_element })
    }

    pub fn open_uniform(degree: usize, elements: usize) -> Result<Self> {
        Self::new(KnotVector::open_uniform(degree, elements)?)
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.kv
    }

    pub fn knots(&self) -> &[f64] {
        self.kv.knots()
    }

    pub fn degree(&self) -> usize {
        self.kv.degree()
    }

    pub fn len(&self) -> usize {
        self.kv.num_basis()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn elements(&self) -> &[Element1D] {
        &self.elements
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.kv.first(), self.kv.last())
    }

    pub fn element_of_span(&self, span: usize) -> Option<usize> {
        self.span_element.get(span).copied().flatten()
    }

    /// Element containing `u` (half-open spans, closed at the right end).
    pub fn element_of(&self, u: f64) -> Result<usize> {
        let span = self.kv.find_span(u)?;
        Ok(self.span_element[span].expect("find_span returns non-empty spans"))
    }

    /// Index of the first of the `p + 1` functions non-zero on element `e`.
    pub fn first_active(&self, e: usize) -> usize {
        self.elements[e].span - self.degree()
    }

    /// `[u_i, u_{i+p+1}]`.
    pub fn support(&self, i: usize) -> (f64, f64) {
        let k = self.knots();
        (k[i], k[i + self.degree() + 1])
    }

    /// Elements covered by the support of `B_i`.
    pub fn support_elements(&self, i: usize) -> Range<usize> {
        let p = self.degree();
        let first = (i..=i + p).find_map(|l| self.span_element[l]).expect("non-empty support");
        let last = (i..=i + p).rev().find_map(|l| self.span_element[l]).expect("non-empty support");
        first..last + 1
    }

    /// Functions whose support shares at least one element with `B_i`.
    pub fn overlapping(&self, i: usize) -> RangeInclusive<usize> {
        let els = self.support_elements(i);
        let lo = self.first_active(els.start);
        let hi = self.elements[els.end - 1].span;
        lo..=hi
    }

    /// Values of the `p + 1` functions non-zero on `span`, written to `out`.
    ///
    /// `u` is not range-checked; it is expected to lie in the closure of
    /// the span.
    pub fn eval_span_into(&self, span: usize, u: f64, out: &mut [f64]) {
        let p = self.degree();
        let k = self.knots();
        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = u - k[span + 1 - j];
            right[j] = k[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// First index and values of the non-zero functions at `u`.
    pub fn eval_nonzero(&self, u: f64) -> Result<(usize, Vec<f64>)> {
        let span = self.kv.find_span(u)?;
        let mut out = vec![0.0; self.degree() + 1];
        self.eval_span_into(span, u, &mut out);
        Ok((span - self.degree(), out))
    }

    /// Value of a single function; exactly zero outside its support.
    pub fn eval(&self, i: usize, u: f64) -> Result<f64> {
        let (first, vals) = self.eval_nonzero(u)?;
        Ok(if i >= first && i < first + vals.len() { vals[i - first] } else { 0.0 })
    }

    /// Evaluates the spline `sum_i c_i B_i(u)`.
    pub fn eval_spline(&self, coeffs: &[f64], u: f64) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} functions",
                coeffs.len(),
                self.len()
            )));
        }
        let (first, vals) = self.eval_nonzero(u)?;
        Ok(vals.iter().enumerate().map(|(r, v)| v * coeffs[first + r]).sum())
    }
}

/// Tensor-product basis of two uni-variate bases. Flat index `i1 * n2 + i2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBasis2D {
    pub dirs: [Basis1D; 2],
}

impl TensorBasis2D {
    pub fn new(b1: Basis1D, b2: Basis1D) -> Self {
        TensorBasis2D { dirs: [b1, b2] }
    }

    /// Same open uniform basis on `[0, 1]` in both directions.
    pub fn open_uniform(degree: usize, elements: usize) -> Result<Self> {
        let b = Basis1D::open_uniform(degree, elements)?;
        Ok(TensorBasis2D::new(b.clone(), b))
    }

    pub fn len(&self) -> usize {
        self.dirs[0].len() * self.dirs[1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.dirs[0].len(), self.dirs[1].len())
    }

    pub fn element_shape(&self) -> (usize, usize) {
        (self.dirs[0].num_elements(), self.dirs[1].num_elements())
    }

    pub fn flat(&self, i1: usize, i2: usize) -> usize {
        i1 * self.dirs[1].len() + i2
    }

    pub fn unflat(&self, i: usize) -> (usize, usize) {
        let n2 = self.dirs[1].len();
        (i / n2, i % n2)
    }

    pub fn element_flat(&self, e1: usize, e2: usize) -> usize {
        e1 * self.dirs[1].num_elements() + e2
    }

    pub fn element_unflat(&self, e: usize) -> (usize, usize) {
        let m2 = self.dirs[1].num_elements();
        (e / m2, e % m2)
    }

    pub fn eval(&self, i1: usize, i2: usize, u1: f64, u2: f64) -> Result<f64> {
        Ok(self.dirs[0].eval(i1, u1)? * self.dirs[1].eval(i2, u2)?)
    }

    /// Evaluates `sum c_{i} B_i(u1, u2)` for flat-indexed coefficients.
    pub fn eval_spline(&self, coeffs: &[f64], u1: f64, u2: f64) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(Error::Dimension(format!("{} coefficients for {} functions", coeffs.len(), self.len())));
        }
        let (f1, v1) = self.dirs[0].eval_nonzero(u1)?;
        let (f2, v2) = self.dirs[1].eval_nonzero(u2)?;
        let mut s = 0.0;
        for (a, x) in v1.iter().enumerate() {
            for (b, y) in v2.iter().enumerate() {
                s += x * y * coeffs[self.flat(f1 + a, f2 + b)];
            }
        }
        Ok(s)
    }
}
