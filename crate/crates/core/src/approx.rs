//! Chebyshev interpolation, bivariate Bernstein fitting, and the odd-degree
//! perturbation `(x, y, z + ε t^(2N+1), w + ε s^(2N+1))`.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::{Float, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Interval, Poly1, Poly2};

/// Number of uniform samples used to report a fit's error.
pub const ERROR_SAMPLES: usize = 1000;

/// A Chebyshev interpolant in monomial form with its sampled error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChebFit {
    pub poly: Poly1,
    pub interval: Interval,
    pub degree: usize,
    /// Coefficients in the Chebyshev basis of the affinely mapped variable.
    pub cheb_coeffs: Vec<f64>,
    /// Max |poly - f| over [`ERROR_SAMPLES`] uniform points of the interval.
    pub max_error: f64,
}

fn checked(f: &impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteSample { x })
    }
}

/// Interpolate `f` at the `degree + 1` Chebyshev points of the first kind
/// mapped onto `iv` and convert the result to the monomial basis in the
/// original variable.
pub fn chebyshev_fit(f: impl Fn(f64) -> f64, iv: Interval, degree: usize) -> Result<ChebFit> {
    if degree == 0 {
        return Err(Error::InvalidParameter("Chebyshev degree must be at least 1".into()));
    }
    if iv.width() <= 0.0 {
        return Err(Error::InvalidInterval { lo: iv.lo, hi: iv.hi });
    }
    let n = degree + 1;
    let nodes: Vec<f64> = (0..n)
        .map(|k| (PI * (k as f64 + 0.5) / n as f64).cos())
        .collect();
    let vals = nodes
        .iter()
        .map(|&u| checked(&f, iv.mid() + 0.5 * iv.width() * u))
        .collect::<Result<Vec<_>>>()?;

    // Discrete orthogonality of T_j at the nodes.
    let cheb_coeffs: Vec<f64> = (0..n)
        .map(|j| {
            let s: f64 = (0..n)
                .map(|k| vals[k] * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                .sum();
            let w = if j == 0 { 1.0 } else { 2.0 };
            w * s / n as f64
        })
        .collect();

    // u(t) = (2t - lo - hi) / (hi - lo); T_{j+1} = 2u T_j - T_{j-1}.
    let u = Poly1::new(vec![-(iv.lo + iv.hi) / iv.width(), 2.0 / iv.width()]);
    let two_u = u.scale(2.0);
    let mut t_prev = Poly1::constant(1.0);
    let mut t_cur = u.clone();
    let mut poly = Poly1::constant(cheb_coeffs[0]);
    for (j, &c) in cheb_coeffs.iter().enumerate().skip(1) {
        if j > 1 {
            let next = &(&two_u * &t_cur) - &t_prev;
            t_prev = std::mem::replace(&mut t_cur, next);
        }
        poly = &poly + &t_cur.scale(c);
    }

    let mut max_error = 0.0_f64;
    for i in 0..ERROR_SAMPLES {
        let x = iv.node(i, ERROR_SAMPLES);
        max_error = max_error.max((poly.eval(x) - checked(&f, x)?).abs());
    }
    Ok(ChebFit { poly, interval: iv, degree, cheb_coeffs, max_error })
}

/// Uniform `(degree + 1)^2` lattice on `[-1, 1]^2`, row-major with `t` outer.
pub fn bernstein_nodes(degree: usize) -> Vec<(f64, f64)> {
    let iv = Interval::symmetric(1.0);
    let n = degree + 1;
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (iv.node(i, n), iv.node(j, n))))
        .collect()
}

/// Sample `map` on the Bernstein lattice of the given degree.
pub fn bernstein_lattice<F>(degree: usize, map: F) -> Vec<[f64; 4]>
where
    F: Fn(f64, f64) -> [f64; 4] + Sync,
{
    bernstein_nodes(degree)
        .into_par_iter()
        .map(|(t, s)| map(t, s))
        .collect()
}

/// Integer coefficients of `C(n,i) (1+x)^i (1-x)^(n-i)` for every `i`.
fn bernstein_integer_basis(n: usize) -> Vec<Vec<BigInt>> {
    let mul = |a: &[BigInt], b: &[i64]| -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    };
    (0..=n)
        .map(|i| {
            let mut p = vec![binomial(n, i)];
            for _ in 0..i {
                p = mul(&p, &[1, 1]);
            }
            for _ in i..n {
                p = mul(&p, &[1, -1]);
            }
            p
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut c = BigInt::from(1);
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// `x * 2^e` without intermediate overflow or underflow.
fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// `v * 2^e` rounded to the nearest double (up to one ulp).
fn big_to_f64(v: &BigInt, e: i64) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let bits = v.bits() as i64;
    let shift = (bits - 60).max(0);
    let top = (v.abs() >> shift as usize).to_u64().unwrap_or(u64::MAX) as f64;
    let mag = ldexp(top, shift + e);
    if v.is_negative() {
        -mag
    } else {
        mag
    }
}

/// Fit the Bernstein polynomial of the given degree to samples on the
/// lattice from [`bernstein_nodes`] and return the four coordinates in the
/// monomial basis of `(t, s) ∈ [-1, 1]^2`.
///
/// The basis change is carried out in exact integer arithmetic: at degree 40
/// the alternating binomial sums cancel far below double precision, and a
/// floating-point conversion would lose every significant digit.
pub fn bernstein_fit2(samples: &[[f64; 4]], degree: usize) -> Result<[Poly2; 4]> {
    if degree == 0 {
        return Err(Error::InvalidParameter("Bernstein degree must be at least 1".into()));
    }
    let n = degree + 1;
    if samples.len() != n * n {
        return Err(Error::GridMismatch { degree, expected: n * n, got: samples.len() });
    }
    for (idx, p) in samples.iter().enumerate() {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { x: bernstein_nodes(degree)[idx].0 });
        }
    }
    let beta = bernstein_integer_basis(degree);
    let coords: Vec<Poly2> = (0..4)
        .into_par_iter()
        .map(|c| {
            let decoded: Vec<(i8, u64, i64)> = samples
                .iter()
                .map(|p| {
                    let (m, e, sign) = p[c].integer_decode();
                    (sign, m, e as i64)
                })
                .collect();
            let e_min = decoded
                .iter()
                .filter(|d| d.1 != 0)
                .map(|d| d.2)
                .min()
                .unwrap_or(0);
            let data: Vec<BigInt> = decoded
                .iter()
                .map(|&(sign, m, e)| {
                    if m == 0 {
                        return BigInt::zero();
                    }
                    let v = BigInt::from(m) << (e - e_min) as usize;
                    if sign < 0 {
                        -v
                    } else {
                        v
                    }
                })
                .collect();
            // r[i][l] = sum_j F_ij beta_j[l]; a[k][l] = sum_i beta_i[k] r[i][l]
            let r: Vec<Vec<BigInt>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|l| {
                            (0..n)
                                .filter(|&j| !data[i * n + j].is_zero())
                                .map(|j| &data[i * n + j] * &beta[j][l])
                                .sum()
                        })
                        .collect()
                })
                .collect();
            let scale = e_min - 2 * degree as i64;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|k| {
                    (0..n)
                        .map(|l| {
                            let a: BigInt = (0..n).map(|i| &beta[i][k] * &r[i][l]).sum();
                            big_to_f64(&a, scale)
                        })
                        .collect()
                })
                .collect();
            Poly2::from_rows(rows)
        })
        .collect();
    let [a, b, c, d]: [Poly2; 4] = coords.try_into().expect("four coordinates");
    Ok([a, b, c, d])
}

/// Parameters of the odd-degree perturbation. `half_degree` is `N` in the
/// exponent `2N + 1`; `delta_z` and `delta_w` are the coefficients placed on
/// `t^(2N+1)` and `s^(2N+1)` at full strength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub half_degree: u32,
    pub epsilon: f64,
    pub delta_z: f64,
    pub delta_w: f64,
    /// Upper bound on ε derived from the coincidence set; `None` when the
    /// set imposes no constraint.
    pub bound: Option<f64>,
}

impl PerturbationSpec {
    pub fn new(
        half_degree: u32,
        epsilon: f64,
        delta_z: f64,
        delta_w: f64,
        bound: Option<f64>,
    ) -> Result<Self> {
        if half_degree == 0 {
            return Err(Error::InvalidParameter("N must be a positive integer".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        for (name, d) in [("delta_z", delta_z), ("delta_w", delta_w)] {
            if !(d > 0.0 && d <= epsilon) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, epsilon], got {d}"
                )));
            }
        }
        if let Some(b) = bound {
            if epsilon >= b {
                return Err(Error::InvalidParameter(format!(
                    "epsilon {epsilon} is not below the injectivity bound {b}"
                )));
            }
        }
        Ok(PerturbationSpec { half_degree, epsilon, delta_z, delta_w, bound })
    }

    pub fn exponent(&self) -> usize {
        2 * self.half_degree as usize + 1
    }

    /// `(x, y, z + u δ_z t^(2N+1), w + u δ_w s^(2N+1))`
    pub fn apply(&self, map: &[Poly2; 4], u: f64) -> [Poly2; 4] {
        let e = self.exponent();
        let zt = Poly2::from_t(&Poly1::monomial(u * self.delta_z, e));
        let ws = Poly2::from_s(&Poly1::monomial(u * self.delta_w, e));
        [map[0].clone(), map[1].clone(), &map[2] + &zt, &map[3] + &ws]
    }
}

/// A pair of parameter points `((t1, s1), (t2, s2))`.
pub type ParamPair = ((f64, f64), (f64, f64));

fn gap_is_zero(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs() + b.abs())
}

/// `gap / |p1^e - p2^e|`: how large ε may grow before the perturbation can
/// close `gap`. Zero for a zero gap, infinite when the denominator vanishes.
fn closing_ratio(gap: f64, zero: bool, p1: f64, p2: f64, e: i32) -> f64 {
    if zero {
        return 0.0;
    }
    let d = (p1.powi(e) - p2.powi(e)).abs();
    if d == 0.0 {
        f64::INFINITY
    } else {
        gap / d
    }
}

/// Largest ε keeping every pair of `pairs` apart under the whole family
/// `u ∈ [0, 1]`.
///
/// A pair stays apart as long as either its `z` images or its `w` images
/// stay apart. The `z` gap survives while `ε < |z1 - z2| / |t1^(2N+1) - t2^(2N+1)|`
/// and likewise for `w` with `s`, so each pair allows the larger of the two
/// ratios. Pairs with equal `w` reduce to the `z` ratio alone and vice versa.
/// Returns `None` when nothing constrains ε.
pub fn lemma_bound(map: &[Poly2; 4], half_degree: u32, pairs: &[ParamPair]) -> Result<Option<f64>> {
    let e = 2 * half_degree as i32 + 1;
    let mut bound = f64::INFINITY;
    for &((t1, s1), (t2, s2)) in pairs {
        let (z1, z2) = (map[2].eval(t1, s1), map[2].eval(t2, s2));
        let (w1, w2) = (map[3].eval(t1, s1), map[3].eval(t2, s2));
        let (zz, wz) = (gap_is_zero(z1, z2), gap_is_zero(w1, w2));
        if zz && wz {
            return Err(Error::ZeroGap { a: (t1, s1), b: (t2, s2) });
        }
        let rz = closing_ratio((z1 - z2).abs(), zz, t1, t2, e);
        let rw = closing_ratio((w1 - w2).abs(), wz, s1, s2, e);
        bound = bound.min(rz.max(rw));
    }
    Ok(bound.is_finite().then_some(bound))
}

/// Choose ε at half the bound (1.0 when unconstrained) and perturb `map`.
pub fn odd_perturbation(
    map: &[Poly2; 4],
    half_degree: u32,
    pairs: &[ParamPair],
) -> Result<(PerturbationSpec, [Poly2; 4])> {
    let bound = lemma_bound(map, half_degree, pairs)?;
    let epsilon = bound.map_or(1.0, |b| 0.5 * b);
    let spec = PerturbationSpec::new(half_degree, epsilon, epsilon, epsilon, bound)?;
    let out = spec.apply(map, 1.0);
    Ok((spec, out))
}
