//! Dense real polynomials in one and two variables.
//!
//! [`Poly1`] stores `c[i]` as the coefficient of `t^i`; [`Poly2`] stores a
//! grid whose entry `(i, j)` multiplies `t^i s^j`. Both keep a trimmed
//! representation so that degrees are always exact and the zero polynomial
//! has no coefficients at all.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`; serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn symmetric(r: f64) -> Self {
        Interval { lo: -r.abs(), hi: r.abs() }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Point at fraction `u` of the way from `lo` to `hi`.
    pub fn lerp(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }

    /// Node `i` of `n` uniformly spaced nodes that include both endpoints.
    pub fn node(&self, i: usize, n: usize) -> f64 {
        if n < 2 {
            return self.lo;
        }
        if i + 1 == n {
            return self.hi;
        }
        self.lerp(i as f64 / (n - 1) as f64)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Serialize, Deserialize)]
struct Coeffs1 {
    coeffs: Vec<f64>,
}

/// Univariate polynomial, `coeffs[i]` multiplies `t^i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Coeffs1", into = "Coeffs1")]
pub struct Poly1 {
    coeffs: Vec<f64>,
}

impl From<Coeffs1> for Poly1 {
    fn from(c: Coeffs1) -> Self {
        Poly1::new(c.coeffs)
    }
}

impl From<Poly1> for Coeffs1 {
    fn from(p: Poly1) -> Self {
        Coeffs1 { coeffs: p.coeffs }
    }
}

impl Poly1 {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly1 { coeffs }
    }

    pub fn zero() -> Self {
        Poly1 { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly1::new(vec![c])
    }

    /// `c * t^k`
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = c;
        Poly1::new(v)
    }

    /// The identity polynomial `t`.
    pub fn identity() -> Self {
        Poly1::new(vec![0.0, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Horner evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Value and first derivative in one Horner pass.
    pub fn eval_d(&self, t: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for &c in self.coeffs.iter().rev() {
            d = d * t + v;
            v = v * t + c;
        }
        (v, d)
    }

    pub fn derive(&self) -> Poly1 {
        self.derive_n(1)
    }

    pub fn derive_n(&self, order: usize) -> Poly1 {
        let mut p = self.clone();
        for _ in 0..order {
            if p.coeffs.len() <= 1 {
                return Poly1::zero();
            }
            let c = p
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect();
            p = Poly1::new(c);
        }
        p
    }

    /// Antiderivative with zero constant term.
    pub fn integrate(&self) -> Poly1 {
        if self.is_zero() {
            return Poly1::zero();
        }
        let mut c = Vec::with_capacity(self.coeffs.len() + 1);
        c.push(0.0);
        c.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, &a)| a / (i + 1) as f64),
        );
        Poly1::new(c)
    }

    pub fn scale(&self, k: f64) -> Poly1 {
        Poly1::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// `p(a + b t)`
    pub fn compose_affine(&self, a: f64, b: f64) -> Poly1 {
        let lin = Poly1::new(vec![a, b]);
        self.coeffs
            .iter()
            .rev()
            .fold(Poly1::zero(), |acc, &c| &(&acc * &lin) + &Poly1::constant(c))
    }

    /// Magnitude scale used to make root tolerances dimensionless:
    /// largest coefficient times the largest power of the interval radius.
    pub fn scale_on(&self, iv: &Interval) -> f64 {
        let r = iv.lo.abs().max(iv.hi.abs()).max(1.0);
        let deg = self.degree().unwrap_or(0) as i32;
        self.max_abs_coeff() * r.powi(deg)
    }
}

fn add_slices(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + sign * b.get(i).copied().unwrap_or(0.0))
        .collect()
}

impl Add for &Poly1 {
    type Output = Poly1;
    fn add(self, rhs: &Poly1) -> Poly1 {
        Poly1::new(add_slices(&self.coeffs, &rhs.coeffs, 1.0))
    }
}

impl Sub for &Poly1 {
    type Output = Poly1;
    fn sub(self, rhs: &Poly1) -> Poly1 {
        Poly1::new(add_slices(&self.coeffs, &rhs.coeffs, -1.0))
    }
}

impl Mul for &Poly1 {
    type Output = Poly1;
    fn mul(self, rhs: &Poly1) -> Poly1 {
        if self.is_zero() || rhs.is_zero() {
            return Poly1::zero();
        }
        // Terms i and k-i are added pairwise so that a*b and b*a round identically.
        let (a, b) = (&self.coeffs, &rhs.coeffs);
        let term = |i: usize, k: usize| -> f64 {
            match (a.get(i), k.checked_sub(i).and_then(|j| b.get(j))) {
                (Some(x), Some(y)) => x * y,
                _ => 0.0,
            }
        };
        let n = a.len() + b.len() - 1;
        let c = (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..=k / 2 {
                    let j = k - i;
                    acc += if i == j { term(i, k) } else { term(i, k) + term(j, k) };
                }
                acc
            })
            .collect();
        Poly1::new(c)
    }
}

impl Neg for &Poly1 {
    type Output = Poly1;
    fn neg(self) -> Poly1 {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned_ops {
    ($t:ty) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, rhs: $t) -> $t {
                &self + &rhs
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, rhs: $t) -> $t {
                &self - &rhs
            }
        }
        impl Mul for $t {
            type Output = $t;
            fn mul(self, rhs: $t) -> $t {
                &self * &rhs
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                -&self
            }
        }
    };
}

forward_owned_ops!(Poly1);
forward_owned_ops!(Poly2);

/// A real root found by [`roots_in_interval`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub x: f64,
    /// Touching root without a sign change (double, quadruple, ...).
    pub even_multiplicity: bool,
}

const REFINE_ITERS: usize = 200;

/// Refine a sign-change bracket with bisection-guarded Newton steps.
fn refine_bracket(p: &Poly1, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = p.eval(lo);
    if flo == 0.0 {
        return lo;
    }
    if p.eval(hi) == 0.0 {
        return hi;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..REFINE_ITERS {
        let (fx, dfx) = p.eval_d(x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == (flo < 0.0) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
        let newton = x - fx / dfx;
        x = if dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

/// Roots of `p` in `(lo, hi]`-style breakpoints via the critical points of `p`.
fn isolate(p: &Poly1, lo: f64, hi: f64, tol_abs: f64, out: &mut Vec<Root>) {
    match p.degree() {
        None | Some(0) => return,
        Some(1) => {
            let x = -p.coeffs[0] / p.coeffs[1];
            if x >= lo && x <= hi {
                out.push(Root { x, even_multiplicity: false });
            }
            return;
        }
        _ => {}
    }
    let dp = p.derive();
    let mut crit = Vec::new();
    let dtol = tol_abs.max(f64::MIN_POSITIVE) * (dp.max_abs_coeff() / p.max_abs_coeff()).max(1.0);
    isolate(&dp, lo, hi, dtol, &mut crit);
    let mut breaks = Vec::with_capacity(crit.len() + 2);
    breaks.push(lo);
    breaks.extend(crit.iter().map(|r| r.x).filter(|&x| x > lo && x < hi));
    breaks.push(hi);
    breaks.dedup();

    let mut vals: Vec<f64> = breaks.iter().map(|&x| p.eval(x)).collect();
    // A critical point grazing zero between same-signed neighbours is a
    // touching root; snap it so the adjacent brackets do not split it in two.
    for i in 1..breaks.len().saturating_sub(1) {
        let (l, r) = (vals[i - 1], vals[i + 1]);
        if vals[i].abs() <= tol_abs && l != 0.0 && (l < 0.0) == (r < 0.0) {
            vals[i] = 0.0;
        }
    }
    for w in 0..breaks.len() - 1 {
        let (fa, fb) = (vals[w], vals[w + 1]);
        if fa != 0.0 && fb != 0.0 && (fa < 0.0) != (fb < 0.0) {
            out.push(Root { x: refine_bracket(p, breaks[w], breaks[w + 1]), even_multiplicity: false });
        }
    }
    for (i, &x) in breaks.iter().enumerate() {
        if vals[i] != 0.0 {
            continue;
        }
        let interior = i > 0 && i + 1 < breaks.len();
        let touching = interior && {
            let (l, r) = (vals[i - 1], vals[i + 1]);
            l != 0.0 && r != 0.0 && (l < 0.0) == (r < 0.0)
        };
        out.push(Root { x, even_multiplicity: touching });
    }
}

/// Real roots of `p` inside `iv`, sorted ascending.
///
/// The interval is cut at the critical points of `p` (found recursively), so
/// `p` is monotone on every piece and each sign change holds exactly one
/// simple root. Critical points where `|p|` falls below `tol * scale` without
/// a sign change are reported with `even_multiplicity = true`.
pub fn roots_in_interval(p: &Poly1, iv: Interval, tol: f64) -> Result<Vec<Root>> {
    if p.is_zero() {
        return Err(Error::DegenerateInput("zero polynomial has no isolated roots".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("root tolerance must be positive, got {tol}")));
    }
    let tol_abs = tol * p.scale_on(&iv);
    let mut roots = Vec::new();
    isolate(p, iv.lo, iv.hi, tol_abs, &mut roots);
    roots.sort_by(|a, b| a.x.total_cmp(&b.x));
    let sep = 2e-9 * iv.lo.abs().max(iv.hi.abs()).max(1.0);
    let mut merged: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(last) if (r.x - last.x).abs() <= sep => {
                last.even_multiplicity &= r.even_multiplicity;
            }
            _ => merged.push(r),
        }
    }
    Ok(merged)
}

#[derive(Serialize, Deserialize)]
struct Coeffs2 {
    coeffs: Vec<Vec<f64>>,
}

/// Bivariate polynomial; entry `(i, j)` multiplies `t^i s^j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Coeffs2", into = "Coeffs2")]
pub struct Poly2 {
    rows: usize,
    cols: usize,
    c: Vec<f64>,
}

impl From<Coeffs2> for Poly2 {
    fn from(c: Coeffs2) -> Self {
        Poly2::from_rows(c.coeffs)
    }
}

impl From<Poly2> for Coeffs2 {
    fn from(p: Poly2) -> Self {
        Coeffs2 { coeffs: p.to_rows() }
    }
}

impl Poly2 {
    /// Build from rows indexed by the power of `t`; ragged rows are zero-padded.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut c = vec![0.0; rows.len() * cols];
        for (i, r) in rows.iter().enumerate() {
            c[i * cols..i * cols + r.len()].copy_from_slice(r);
        }
        Poly2::from_dense(rows.len(), cols, c)
    }

    fn from_dense(rows: usize, cols: usize, c: Vec<f64>) -> Self {
        let mut p = Poly2 { rows, cols, c };
        p.trim();
        p
    }

    fn trim(&mut self) {
        let mut last_row = 0;
        let mut last_col = 0;
        let mut any = false;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.c[i * self.cols + j] != 0.0 {
                    any = true;
                    last_row = last_row.max(i);
                    last_col = last_col.max(j);
                }
            }
        }
        if !any {
            *self = Poly2::zero();
            return;
        }
        let (nr, nc) = (last_row + 1, last_col + 1);
        if nr == self.rows && nc == self.cols {
            return;
        }
        let mut c = vec![0.0; nr * nc];
        for i in 0..nr {
            c[i * nc..(i + 1) * nc].copy_from_slice(&self.c[i * self.cols..i * self.cols + nc]);
        }
        *self = Poly2 { rows: nr, cols: nc, c };
    }

    pub fn zero() -> Self {
        Poly2 { rows: 0, cols: 0, c: Vec::new() }
    }

    pub fn constant(v: f64) -> Self {
        Poly2::from_dense(1, 1, vec![v])
    }

    /// Embed a polynomial in `t` (constant in `s`).
    pub fn from_t(p: &Poly1) -> Self {
        Poly2::from_dense(p.coeffs.len(), 1.min(p.coeffs.len()), p.coeffs.clone())
    }

    /// Embed a polynomial in `s` (constant in `t`).
    pub fn from_s(p: &Poly1) -> Self {
        Poly2::from_dense(1.min(p.coeffs.len()), p.coeffs.len(), p.coeffs.clone())
    }

    /// `a(t) * b(s)`
    pub fn outer(a: &Poly1, b: &Poly1) -> Self {
        let (r, c) = (a.coeffs.len(), b.coeffs.len());
        let mut v = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                v[i * c + j] = a.coeffs[i] * b.coeffs[j];
            }
        }
        Poly2::from_dense(r, c, v)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Bounding degrees `(deg_t, deg_s)`; `None` for zero.
    pub fn degrees(&self) -> Option<(usize, usize)> {
        if self.is_zero() {
            None
        } else {
            Some((self.rows - 1, self.cols - 1))
        }
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i < self.rows && j < self.cols {
            self.c[i * self.cols + j]
        } else {
            0.0
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.c[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Nested Horner: inner in `s` per row, outer in `t`.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let mut acc = 0.0;
        for i in (0..self.rows).rev() {
            let row = &self.c[i * self.cols..(i + 1) * self.cols];
            let r = row.iter().rev().fold(0.0, |a, &c| a * s + c);
            acc = acc * t + r;
        }
        acc
    }

    pub fn derive_t(&self) -> Poly2 {
        if self.rows <= 1 {
            return Poly2::zero();
        }
        let cols = self.cols;
        let mut c = vec![0.0; (self.rows - 1) * cols];
        for i in 1..self.rows {
            for j in 0..cols {
                c[(i - 1) * cols + j] = self.c[i * cols + j] * i as f64;
            }
        }
        Poly2::from_dense(self.rows - 1, cols, c)
    }

    pub fn derive_s(&self) -> Poly2 {
        if self.cols <= 1 {
            return Poly2::zero();
        }
        let nc = self.cols - 1;
        let mut c = vec![0.0; self.rows * nc];
        for i in 0..self.rows {
            for j in 1..self.cols {
                c[i * nc + j - 1] = self.c[i * self.cols + j] * j as f64;
            }
        }
        Poly2::from_dense(self.rows, nc, c)
    }

    pub fn scale(&self, k: f64) -> Poly2 {
        Poly2::from_dense(self.rows, self.cols, self.c.iter().map(|c| c * k).collect())
    }

    fn zip(&self, rhs: &Poly2, sign: f64) -> Poly2 {
        let (r, c) = (self.rows.max(rhs.rows), self.cols.max(rhs.cols));
        let mut v = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                v[i * c + j] = self.coeff(i, j) + sign * rhs.coeff(i, j);
            }
        }
        Poly2::from_dense(r, c, v)
    }

    /// Row `i` as a polynomial in `s`.
    pub fn row(&self, i: usize) -> Poly1 {
        if i >= self.rows {
            return Poly1::zero();
        }
        Poly1::new(self.c[i * self.cols..(i + 1) * self.cols].to_vec())
    }

    /// Column `j` as a polynomial in `t`.
    pub fn col(&self, j: usize) -> Poly1 {
        if j >= self.cols {
            return Poly1::zero();
        }
        Poly1::new((0..self.rows).map(|i| self.c[i * self.cols + j]).collect())
    }

    fn from_cols(cols: Vec<Poly1>) -> Poly2 {
        let rows = cols.iter().map(|p| p.coeffs.len()).max().unwrap_or(0);
        let nc = cols.len();
        let mut v = vec![0.0; rows * nc];
        for (j, p) in cols.iter().enumerate() {
            for (i, &c) in p.coeffs.iter().enumerate() {
                v[i * nc + j] = c;
            }
        }
        Poly2::from_dense(rows, nc, v)
    }

    /// `q(a + b t, s)`
    pub fn compose_affine_t(&self, a: f64, b: f64) -> Poly2 {
        Poly2::from_cols((0..self.cols).map(|j| self.col(j).compose_affine(a, b)).collect())
    }

    /// `q(t, a + b s)`
    pub fn compose_affine_s(&self, a: f64, b: f64) -> Poly2 {
        let rows: Vec<Vec<f64>> = (0..self.rows)
            .map(|i| self.row(i).compose_affine(a, b).coeffs)
            .collect();
        Poly2::from_rows(rows)
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        self.zip(rhs, 1.0)
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        self.zip(rhs, -1.0)
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        if self.is_zero() || rhs.is_zero() {
            return Poly2::zero();
        }
        let (r, c) = (self.rows + rhs.rows - 1, self.cols + rhs.cols - 1);
        let mut v = vec![0.0; r * c];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.c[i * self.cols + j];
                if a == 0.0 {
                    continue;
                }
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        v[(i + k) * c + j + l] += a * rhs.c[k * rhs.cols + l];
                    }
                }
            }
        }
        Poly2::from_dense(r, c, v)
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}
