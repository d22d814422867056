//! Twist spinning: the knotted part of the arc turns about the chord `PQ`
//! while the whole arc spins about the boundary plane.
//!
//! A point `v` of the arc is moved to `v + B(t) D(t, φ)` where
//! `D = sin φ K(v - P) + (1 - cos φ) K²(v - P)` is the Rodrigues
//! displacement about the line through `P` with direction `Q - P`, and `B`
//! is a bump that is 1 on the crossings and 0 near the arc's ends.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::chebyshev_fit;
use crate::catalog::KnotArc;
use crate::error::{Error, Result};
use crate::poly::{Interval, Poly1};
use crate::surface::{Expr, Parametrization, Surface4};

#[derive(Deserialize)]
struct BumpDoc {
    d1: f64,
    d2: f64,
}

/// `B(t) = F(d2 - t²) / (F(t² - d1) + F(d2 - t²))` with `F(x) = exp(-1/x)`
/// for `x > 0` and 0 otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BumpDoc")]
pub struct Bump {
    pub d1: f64,
    pub d2: f64,
}

impl TryFrom<BumpDoc> for Bump {
    type Error = Error;
    fn try_from(d: BumpDoc) -> Result<Self> {
        Bump::new(d.d1, d.d2)
    }
}

impl Bump {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 > 0.0 && d2 > d1 && d2.is_finite()) {
            return Err(Error::InvalidParameter(format!("bump needs 0 < d1 < d2, got ({d1}, {d2})")));
        }
        Ok(Bump { d1, d2 })
    }

    pub fn eval(&self, t: f64) -> f64 {
        // fused t·t - d keeps the two arguments balanced near the midpoint
        self.eval_args(t.mul_add(t, -self.d1), (-t).mul_add(t, self.d2))
    }

    /// `B` as a function of `t²`. Written as `1 / (1 + exp(1/b - 1/a))`,
    /// which is exactly 1/2 when both arguments agree.
    pub fn eval_sq(&self, t2: f64) -> f64 {
        self.eval_args(t2 - self.d1, self.d2 - t2)
    }

    fn eval_args(&self, a: f64, b: f64) -> f64 {
        if a <= 0.0 {
            1.0
        } else if b <= 0.0 {
            0.0
        } else {
            1.0 / (1.0 + (1.0 / b - 1.0 / a).exp())
        }
    }

    /// `dB/dt = -B (1 - B) · 2t (1/a² + 1/b²)`, zero outside the transition.
    pub fn derivative(&self, t: f64) -> f64 {
        let a = t.mul_add(t, -self.d1);
        let b = (-t).mul_add(t, self.d2);
        if a <= 0.0 || b <= 0.0 {
            return 0.0;
        }
        let v = self.eval_args(a, b);
        let w = v * (1.0 - v);
        if w == 0.0 {
            return 0.0;
        }
        -w * 2.0 * t * (1.0 / (a * a) + 1.0 / (b * b))
    }
}

/// `R = I + sin φ K + (1 - cos φ) K²` for a unit axis `k`.
pub fn rodrigues(k: Vector3<f64>, phi: f64) -> Result<Matrix3<f64>> {
    let norm = k.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitAxis { norm });
    }
    let kk = k.cross_matrix();
    Ok(Matrix3::identity() + kk * phi.sin() + kk * kk * (1.0 - phi.cos()))
}

/// `x -> linear · x + translation`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap3 {
    pub linear: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl AffineMap3 {
    pub fn identity() -> Self {
        AffineMap3 { linear: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let v = self.linear * Vector3::from(p) + self.translation;
        [v.x, v.y, v.z]
    }
}

/// The chord between two points of equal height on the arc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistAxis {
    pub t1: f64,
    pub t2: f64,
    /// Common height `h(t1) = h(t2)`.
    pub c: f64,
    pub f21: f64,
    pub g21: f64,
    pub n_len: f64,
    pub p: [f64; 3],
    pub q: [f64; 3],
}

impl TwistAxis {
    pub fn new(arc: &KnotArc, t1: f64, t2: f64) -> Result<Self> {
        if !(t1 < t2) || !arc.ab.contains(t1) || !arc.ab.contains(t2) {
            return Err(Error::InvalidParameter(format!(
                "axis parameters ({t1}, {t2}) must be increasing and inside {}",
                arc.ab
            )));
        }
        let (p, q) = (arc.eval(t1), arc.eval(t2));
        let scale = arc.h.scale_on(&arc.ab);
        if (p[2] - q[2]).abs() > 1e-6 * scale {
            return Err(Error::InvalidParameter(format!(
                "axis ends differ in height: h({t1}) = {}, h({t2}) = {}",
                p[2], q[2]
            )));
        }
        let (f21, g21) = (q[0] - p[0], q[1] - p[1]);
        let n_len = f21.hypot(g21);
        if n_len == 0.0 {
            return Err(Error::InvalidParameter("axis ends coincide".into()));
        }
        let civ = arc.crossing_iv;
        if !(t1 < civ.lo && civ.hi < t2) {
            return Err(Error::NoRoom { lo: civ.lo, hi: civ.hi, t1, t2 });
        }
        Ok(TwistAxis { t1, t2, c: 0.5 * (p[2] + q[2]), f21, g21, n_len, p, q })
    }

    /// Default axis of a catalog arc.
    pub fn from_hint(arc: &KnotArc) -> Result<Self> {
        let (t1, t2) = arc
            .axis_hint
            .ok_or_else(|| Error::InvalidParameter(format!("{} has no default twist axis", arc.name)))?;
        TwistAxis::new(arc, t1, t2)
    }

    pub fn direction(&self) -> Vector3<f64> {
        Vector3::new(self.f21 / self.n_len, self.g21 / self.n_len, 0.0)
    }

    /// Distance from a point to the axis line.
    pub fn distance(&self, v: [f64; 3]) -> f64 {
        let d = Vector3::from(v) - Vector3::from(self.p);
        let k = self.direction();
        (d - k * k.dot(&d)).norm()
    }
}

/// Rotation by `phi` about the axis line; fixes `P` and `Q`.
pub fn axis_rotation(axis: &TwistAxis, phi: f64) -> AffineMap3 {
    let r = rodrigues(axis.direction(), phi).expect("axis direction is normalized");
    let p = Vector3::from(axis.p);
    AffineMap3 { linear: r, translation: p - r * p }
}

/// Polynomials `K(v - P)` and `K²(v - P)` of the arc's parameter.
fn displacement_polys(arc: &KnotArc, axis: &TwistAxis) -> ([Poly1; 3], [Poly1; 3]) {
    let k = axis.direction();
    let kk = k.cross_matrix();
    let d = [
        &arc.f - &Poly1::constant(axis.p[0]),
        &arc.g - &Poly1::constant(axis.p[1]),
        &arc.h - &Poly1::constant(axis.p[2]),
    ];
    let apply = |m: &Matrix3<f64>, v: &[Poly1; 3]| -> [Poly1; 3] {
        std::array::from_fn(|i| {
            (0..3).fold(Poly1::zero(), |acc, j| &acc + &v[j].scale(m[(i, j)]))
        })
    };
    let a = apply(&kk, &d);
    let c = apply(&kk, &a);
    (a, c)
}

/// The blended arc at a fixed rotation angle.
#[derive(Clone, Debug)]
pub struct TwistedArc {
    arc: KnotArc,
    bump: Bump,
    phi: f64,
    a: [Poly1; 3],
    c: [Poly1; 3],
}

impl TwistedArc {
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let b = self.bump.eval(t);
        let (s, omc) = (self.phi.sin(), 1.0 - self.phi.cos());
        let v = self.arc.eval(t);
        std::array::from_fn(|i| v[i] + b * (s * self.a[i].eval(t) + omc * self.c[i].eval(t)))
    }
}

/// `(f̃, g̃, h̃)(·, phi) = (f, g, h) + B · (R'(f, g, h) - (f, g, h))`
pub fn twisted_arc(arc: &KnotArc, axis: &TwistAxis, bump: Bump, phi: f64) -> TwistedArc {
    let (a, c) = displacement_polys(arc, axis);
    TwistedArc { arc: arc.clone(), bump, phi, a, c }
}

/// Bump that is 1 on the crossings and 0 beyond the axis ends, with a 5%
/// margin on each side of the transition band in `t²`.
pub fn choose_bump(arc: &KnotArc, axis: &TwistAxis) -> Result<Bump> {
    let civ = arc.crossing_iv;
    let (t1, t2) = (axis.t1, axis.t2);
    if !(t1 < civ.lo && civ.hi < t2) {
        return Err(Error::NoRoom { lo: civ.lo, hi: civ.hi, t1, t2 });
    }
    let inner = (civ.lo * civ.lo).max(civ.hi * civ.hi);
    let outer = (t1 * t1).min(t2 * t2);
    if !(outer > inner) {
        return Err(Error::NoRoom { lo: civ.lo, hi: civ.hi, t1, t2 });
    }
    let margin = 0.05 * (outer - inner);
    // Snap to a dyadic grid so that t² = (d1 + d2)/2 is representable and
    // both bump arguments agree there exactly.
    let q = 2f64.powi(-20);
    Bump::new(((inner + margin) / q).ceil() * q, ((outer - margin) / q).floor() * q)
}

/// Rows of t and columns of φ sampled by the plane-crossing check.
pub const PLANE_CHECK_GRID: (usize, usize) = (2000, 360);

/// Expression for one twisted coordinate with `φ = kθ`.
fn twisted_expr(base: &Poly1, a: &Poly1, c: &Poly1, bump: Bump, k: i32) -> Expr {
    Expr::sum(vec![
        Expr::poly_t(base.clone()),
        Expr::product(vec![
            Expr::Bump { bump },
            Expr::sum(vec![
                Expr::product(vec![Expr::SinK { k }, Expr::poly_t(a.clone())]),
                Expr::poly_t(c.clone()),
                Expr::product(vec![Expr::CosK { k }, Expr::poly_t(-c)]),
            ]),
        ]),
    ])
}

/// `(f̃(t, kθ), g̃(t, kθ), h̃(t, kθ) cos θ, h̃(t, kθ) sin θ)` on `ab × [0, 2π]`.
///
/// Fails with `PlaneCrossing` if the rotating part dips to or below the
/// boundary plane anywhere on a 2000 × 360 sample of `(t, φ)`.
pub fn twist_spin(arc: &KnotArc, axis: &TwistAxis, bump: Bump, k: u32) -> Result<Surface4> {
    let k = i32::try_from(k).map_err(|_| Error::InvalidParameter(format!("twist count {k} too large")))?;
    let (a, c) = displacement_polys(arc, axis);
    if k != 0 {
        let (nt, nphi) = PLANE_CHECK_GRID;
        let worst = (1..nt)
            .into_par_iter()
            .map(|i| {
                let t = arc.ab.lerp(i as f64 / nt as f64);
                let (h, b) = (arc.h.eval(t), bump.eval(t));
                let (at, ct) = (a[2].eval(t), c[2].eval(t));
                (0..nphi)
                    .map(|j| {
                        let phi = TAU * j as f64 / nphi as f64;
                        let height = h + b * (phi.sin() * at + (1.0 - phi.cos()) * ct);
                        (height, t, phi)
                    })
                    .fold((f64::INFINITY, t, 0.0), |m, x| if x.0 < m.0 { x } else { m })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((f64::INFINITY, 0.0, 0.0), |m, x| if x.0 < m.0 { x } else { m });
        if worst.0 <= 0.0 {
            return Err(Error::PlaneCrossing { t: worst.1, phi: worst.2, height: worst.0 });
        }
    }
    let polys = [&arc.f, &arc.g, &arc.h];
    let [x, y, h] = std::array::from_fn(|i| twisted_expr(polys[i], &a[i], &c[i], bump, k));
    Ok(Surface4 {
        coords: [
            x,
            y,
            Expr::product(vec![h.clone(), Expr::CosK { k: 1 }]),
            Expr::product(vec![h, Expr::SinK { k: 1 }]),
        ],
        t_domain: arc.ab,
        theta_domain: Interval::new(0.0, TAU)?,
        topology: crate::surface::Topology::SPHERE,
    })
}

/// How to treat bump factors when polynomializing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpMode {
    Exact,
    Degree(usize),
}

/// Fit errors collected while polynomializing.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FitLog {
    /// `(label, max sampled error)`, e.g. `("cos 3θ", 1e-3)`.
    pub fits: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Polynomialized {
    pub surface: Surface4,
    pub fit_log: FitLog,
    /// Max coordinate deviation from the input on a 200 × 200 grid.
    pub deviation: f64,
}

/// Samples per side used to measure polynomialization deviation.
pub const DEVIATION_GRID: usize = 200;

/// Max coordinate difference between two parametrizations over a uniform
/// grid of the first one's domain.
pub fn max_deviation<A: Parametrization, B: Parametrization>(a: &A, b: &B, n: usize) -> f64 {
    let (ti, si) = (a.t_domain(), a.theta_domain());
    (0..n)
        .into_par_iter()
        .map(|i| {
            let t = ti.node(i, n);
            (0..n)
                .map(|j| {
                    let s = si.node(j, n);
                    let (p, q) = (a.eval(t, s), b.eval(t, s));
                    (0..4).map(|m| (p[m] - q[m]).abs()).fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Replace every `cos kθ` / `sin kθ` factor by its Chebyshev interpolant on
/// the θ-domain and, with `BumpMode::Degree`, every bump by its interpolant
/// on the t-domain.
pub fn polynomialize_twist(s: &Surface4, cheb_degree: usize, bump: BumpMode) -> Result<Polynomialized> {
    let mut log = FitLog::default();
    let mut cache: Vec<(Expr, Expr)> = Vec::new();
    let mut err = None;
    let mut replace = |leaf: &Expr| -> Option<Expr> {
        if let Some((_, r)) = cache.iter().find(|(k, _)| k == leaf) {
            return Some(r.clone());
        }
        let fitted = match leaf {
            Expr::CosK { k } => {
                let k = *k;
                chebyshev_fit(|x| (k as f64 * x).cos(), s.theta_domain, cheb_degree)
                    .map(|f| (format!("cos {k}θ"), f))
            }
            Expr::SinK { k } => {
                let k = *k;
                chebyshev_fit(|x| (k as f64 * x).sin(), s.theta_domain, cheb_degree)
                    .map(|f| (format!("sin {k}θ"), f))
            }
            Expr::Bump { bump: b } => match bump {
                BumpMode::Exact => return None,
                BumpMode::Degree(d) => {
                    let b = *b;
                    chebyshev_fit(|x| b.eval(x), s.t_domain, d).map(|f| ("bump".to_string(), f))
                }
            },
            _ => return None,
        };
        match fitted {
            Ok((label, fit)) => {
                log.fits.push((label, fit.max_error));
                let r = match leaf {
                    Expr::Bump { .. } => Expr::PolyT { poly: fit.poly },
                    _ => Expr::PolyTheta { poly: fit.poly },
                };
                cache.push((leaf.clone(), r.clone()));
                Some(r)
            }
            Err(e) => {
                err.get_or_insert(e);
                None
            }
        }
    };
    let coords = [0, 1, 2, 3].map(|i| s.coords[i].map_leaves(&mut replace));
    if let Some(e) = err {
        return Err(e);
    }
    let surface = Surface4 { coords, ..s.clone() };
    let deviation = max_deviation(s, &surface, DEVIATION_GRID);
    Ok(Polynomialized { surface, fit_log: log, deviation })
}
