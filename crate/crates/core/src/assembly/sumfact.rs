use crate::quadrature::BasisTable;

/// Weighted rule of one test function in one direction: weights for the
/// consecutive points `start..start + weights.len()` of `table`.
#[derive(Debug, Clone, Copy)]
pub struct Rule1D<'a> {
    pub table: &'a BasisTable,
    pub start: usize,
    pub weights: &'a [f64],
}

impl Rule1D<'_> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Trial index window of a row block in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub first: usize,
    pub len: usize,
}

/// Adds the row of one test function to `out`, a dense block of trial
/// pairs `(j1, j2)` indexed `(j1 - w1.first) * w2.len + (j2 - w2.first)`.
///
/// The inner contraction runs over direction-2 points, the outer one over
/// direction-1 points. `coef(a, b)` is the coefficient at the `a`-th point
/// of `r1` and the `b`-th point of `r2`. Returns the number of
/// multiply-adds.
pub fn sum_factor_row(
    r1: Rule1D<'_>,
    r2: Rule1D<'_>,
    w1: Window,
    w2: Window,
    coef: impl Fn(usize, usize) -> f64,
    scratch: &mut Vec<f64>,
    out: &mut [f64],
) -> usize {
    let n1 = r1.len();
    let mut ops = 0;
    scratch.clear();
    scratch.resize(n1 * w2.len, 0.0);
    for a in 0..n1 {
        if r1.weights[a] == 0.0 {
            continue;
        }
        let t = &mut scratch[a * w2.len..(a + 1) * w2.len];
        for (b, &wb) in r2.weights.iter().enumerate() {
            let wc = wb * coef(a, b);
            if wc == 0.0 {
                continue;
            }
            let (f, vals) = r2.table.at(r2.start + b);
            let off = f - w2.first;
            for (v, slot) in vals.iter().zip(&mut t[off..off + vals.len()]) {
                *slot += wc * v;
            }
            ops += vals.len();
        }
    }
    for a in 0..n1 {
        let wa = r1.weights[a];
        if wa == 0.0 {
            continue;
        }
        let (f, vals) = r1.table.at(r1.start + a);
        let t = &scratch[a * w2.len..(a + 1) * w2.len];
        for (k, v) in vals.iter().enumerate() {
            let s = wa * v;
            let row = (f + k - w1.first) * w2.len;
            for (o, x) in out[row..row + w2.len].iter_mut().zip(t) {
                *o += s * x;
            }
            ops += w2.len;
        }
    }
    ops
}

/// [`sum_factor_row`] with the contraction order swapped: direction 1
/// inner, direction 2 outer.
pub fn sum_factor_row_reversed(
    r1: Rule1D<'_>,
    r2: Rule1D<'_>,
    w1: Window,
    w2: Window,
    coef: impl Fn(usize, usize) -> f64,
    out: &mut [f64],
) -> usize {
    let n2 = r2.len();
    let mut ops = 0;
    let mut scratch = vec![0.0; n2 * w1.len];
    for b in 0..n2 {
        let t = &mut scratch[b * w1.len..(b + 1) * w1.len];
        for (a, &wa) in r1.weights.iter().enumerate() {
            let wc = wa * coef(a, b);
            let (f, vals) = r1.table.at(r1.start + a);
            for (k, v) in vals.iter().enumerate() {
                t[f + k - w1.first] += wc * v;
            }
            ops += vals.len();
        }
    }
    for b in 0..n2 {
        let wb = r2.weights[b];
        let (f, vals) = r2.table.at(r2.start + b);
        for (k, v) in vals.iter().enumerate() {
            let s = wb * v;
            let col = f + k - w2.first;
            for j1 in 0..w1.len {
                out[j1 * w2.len + col] += s * scratch[b * w1.len + j1];
            }
            ops += w1.len;
        }
    }
    ops
}
