//! Parametrized surfaces `(t, θ) -> R^4`.
//!
//! [`Surface4`] holds each coordinate as a small expression tree over
//! polynomial, trigonometric and bump factors; [`PolyMap4`] holds four
//! bivariate polynomials. Both implement [`Parametrization`], which is all
//! the verifier and the exporters need.

use serde::{Deserialize, Serialize};

use crate::approx::PerturbationSpec;
use crate::error::{Error, Result};
use crate::poly::{Interval, Poly1, Poly2};
use crate::twist::Bump;

/// How the edges of the parameter rectangle are glued.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    /// `θ = lo` and `θ = hi` are the same circle.
    pub periodic_theta: bool,
    /// The rows `t = lo` and `t = hi` each collapse to a point.
    pub poles: bool,
}

impl Topology {
    pub const SPHERE: Topology = Topology { periodic_theta: true, poles: true };
    pub const OPEN: Topology = Topology { periodic_theta: false, poles: false };
}

/// Value and first partials of a map to R^4.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: [f64; 4],
    pub dt: [f64; 4],
    pub dtheta: [f64; 4],
}

pub trait Parametrization: Sync {
    fn t_domain(&self) -> Interval;
    fn theta_domain(&self) -> Interval;
    fn topology(&self) -> Topology;
    fn eval(&self, t: f64, theta: f64) -> [f64; 4];
    fn jet(&self, t: f64, theta: f64) -> Jet;
}

/// One coordinate function of `(t, θ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Expr {
    PolyT { poly: Poly1 },
    PolyTheta { poly: Poly1 },
    /// `cos(k θ)`
    CosK { k: i32 },
    /// `sin(k θ)`
    SinK { k: i32 },
    /// Bump function of `t`.
    Bump { bump: Bump },
    Sum { terms: Vec<Expr> },
    Product { factors: Vec<Expr> },
}

impl Expr {
    pub fn poly_t(p: Poly1) -> Expr {
        Expr::PolyT { poly: p }
    }

    pub fn constant(c: f64) -> Expr {
        Expr::PolyT { poly: Poly1::constant(c) }
    }

    pub fn zero() -> Expr {
        Expr::PolyT { poly: Poly1::zero() }
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        Expr::Sum { terms }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        Expr::Product { factors }
    }

    /// Value, ∂/∂t, ∂/∂θ.
    pub fn jet(&self, t: f64, th: f64) -> (f64, f64, f64) {
        match self {
            Expr::PolyT { poly } => {
                let (v, d) = poly.eval_d(t);
                (v, d, 0.0)
            }
            Expr::PolyTheta { poly } => {
                let (v, d) = poly.eval_d(th);
                (v, 0.0, d)
            }
            Expr::CosK { k } => {
                let k = *k as f64;
                let (s, c) = (k * th).sin_cos();
                (c, 0.0, -k * s)
            }
            Expr::SinK { k } => {
                let k = *k as f64;
                let (s, c) = (k * th).sin_cos();
                (s, 0.0, k * c)
            }
            Expr::Bump { bump } => (bump.eval(t), bump.derivative(t), 0.0),
            Expr::Sum { terms } => terms.iter().fold((0.0, 0.0, 0.0), |acc, e| {
                let (v, dt, dth) = e.jet(t, th);
                (acc.0 + v, acc.1 + dt, acc.2 + dth)
            }),
            Expr::Product { factors } => factors.iter().fold((1.0, 0.0, 0.0), |acc, e| {
                let (v, dt, dth) = e.jet(t, th);
                (acc.0 * v, acc.1 * v + acc.0 * dt, acc.2 * v + acc.0 * dth)
            }),
        }
    }

    pub fn eval(&self, t: f64, th: f64) -> f64 {
        match self {
            Expr::PolyT { poly } => poly.eval(t),
            Expr::PolyTheta { poly } => poly.eval(th),
            Expr::CosK { k } => (*k as f64 * th).sin_cos().1,
            Expr::SinK { k } => (*k as f64 * th).sin_cos().0,
            Expr::Bump { bump } => bump.eval(t),
            Expr::Sum { terms } => terms.iter().map(|e| e.eval(t, th)).sum(),
            Expr::Product { factors } => factors.iter().map(|e| e.eval(t, th)).product(),
        }
    }

    /// Rebuild the tree bottom-up, giving `f` a chance to replace each leaf.
    pub fn map_leaves(&self, f: &mut impl FnMut(&Expr) -> Option<Expr>) -> Expr {
        match self {
            Expr::Sum { terms } => Expr::Sum { terms: terms.iter().map(|e| e.map_leaves(f)).collect() },
            Expr::Product { factors } => {
                Expr::Product { factors: factors.iter().map(|e| e.map_leaves(f)).collect() }
            }
            leaf => f(leaf).unwrap_or_else(|| leaf.clone()),
        }
    }

    /// Visit every leaf.
    pub fn for_each_leaf(&self, f: &mut impl FnMut(&Expr)) {
        match self {
            Expr::Sum { terms } => terms.iter().for_each(|e| e.for_each_leaf(f)),
            Expr::Product { factors } => factors.iter().for_each(|e| e.for_each_leaf(f)),
            leaf => f(leaf),
        }
    }

    /// Expand into a bivariate polynomial in `(t, θ)` if every leaf is polynomial.
    pub fn to_poly2(&self) -> Option<Poly2> {
        match self {
            Expr::PolyT { poly } => Some(Poly2::from_t(poly)),
            Expr::PolyTheta { poly } => Some(Poly2::from_s(poly)),
            Expr::CosK { .. } | Expr::SinK { .. } | Expr::Bump { .. } => None,
            Expr::Sum { terms } => terms
                .iter()
                .try_fold(Poly2::zero(), |acc, e| Some(&acc + &e.to_poly2()?)),
            Expr::Product { factors } => factors
                .iter()
                .try_fold(Poly2::constant(1.0), |acc, e| Some(&acc * &e.to_poly2()?)),
        }
    }
}

/// A surface given by four coordinate expressions on `t_domain × theta_domain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surface4 {
    pub coords: [Expr; 4],
    pub t_domain: Interval,
    pub theta_domain: Interval,
    pub topology: Topology,
}

impl Surface4 {
    /// Keep the coordinates listed in `axes` (0..4) and zero the fourth slot.
    pub fn select(&self, axes: [usize; 3]) -> Result<Surface4> {
        if axes.iter().any(|&a| a > 3) {
            return Err(Error::BadAxes(format!("axis index out of range in {axes:?}")));
        }
        let c = &self.coords;
        Ok(Surface4 {
            coords: [c[axes[0]].clone(), c[axes[1]].clone(), c[axes[2]].clone(), Expr::zero()],
            ..self.clone()
        })
    }

    pub fn is_polynomial(&self) -> bool {
        self.coords.iter().all(|e| e.to_poly2().is_some())
    }
}

impl Parametrization for Surface4 {
    fn t_domain(&self) -> Interval {
        self.t_domain
    }
    fn theta_domain(&self) -> Interval {
        self.theta_domain
    }
    fn topology(&self) -> Topology {
        self.topology
    }
    fn eval(&self, t: f64, th: f64) -> [f64; 4] {
        std::array::from_fn(|i| self.coords[i].eval(t, th))
    }
    fn jet(&self, t: f64, th: f64) -> Jet {
        let mut j = Jet::default();
        for (i, e) in self.coords.iter().enumerate() {
            let (v, dt, dth) = e.jet(t, th);
            j.value[i] = v;
            j.dt[i] = dt;
            j.dtheta[i] = dth;
        }
        j
    }
}

#[derive(Serialize, Deserialize)]
struct PolyMap4Doc {
    coords: [Poly2; 4],
    t_domain: Interval,
    theta_domain: Interval,
    topology: Topology,
}

/// Four bivariate polynomials in `(t, s)` with their domain and gluing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PolyMap4Doc", into = "PolyMap4Doc")]
pub struct PolyMap4 {
    coords: [Poly2; 4],
    dt: [Poly2; 4],
    ds: [Poly2; 4],
    t_domain: Interval,
    theta_domain: Interval,
    topology: Topology,
}

impl From<PolyMap4Doc> for PolyMap4 {
    fn from(d: PolyMap4Doc) -> Self {
        PolyMap4::new(d.coords, d.t_domain, d.theta_domain, d.topology)
    }
}

impl From<PolyMap4> for PolyMap4Doc {
    fn from(p: PolyMap4) -> Self {
        PolyMap4Doc {
            coords: p.coords,
            t_domain: p.t_domain,
            theta_domain: p.theta_domain,
            topology: p.topology,
        }
    }
}

impl PolyMap4 {
    pub fn new(coords: [Poly2; 4], t_domain: Interval, theta_domain: Interval, topology: Topology) -> Self {
        let dt = std::array::from_fn(|i| coords[i].derive_t());
        let ds = std::array::from_fn(|i| coords[i].derive_s());
        PolyMap4 { coords, dt, ds, t_domain, theta_domain, topology }
    }

    /// Expand a surface whose every factor is polynomial.
    pub fn from_surface(s: &Surface4) -> Result<Self> {
        let mut out = Vec::with_capacity(4);
        for (i, e) in s.coords.iter().enumerate() {
            out.push(e.to_poly2().ok_or_else(|| {
                Error::DegenerateInput(format!("coordinate {i} has non-polynomial factors"))
            })?);
        }
        let coords: [Poly2; 4] = out.try_into().expect("four coordinates");
        Ok(PolyMap4::new(coords, s.t_domain, s.theta_domain, s.topology))
    }

    pub fn coords(&self) -> &[Poly2; 4] {
        &self.coords
    }

    /// Same surface over `[-1, 1]^2` via the affine change of both variables.
    pub fn to_unit_square(&self) -> PolyMap4 {
        let (ti, si) = (self.t_domain, self.theta_domain);
        let coords = std::array::from_fn(|i| {
            self.coords[i]
                .compose_affine_t(ti.mid(), 0.5 * ti.width())
                .compose_affine_s(si.mid(), 0.5 * si.width())
        });
        let unit = Interval::symmetric(1.0);
        PolyMap4::new(coords, unit, unit, self.topology)
    }

    /// The member `F_u` of the perturbation family.
    pub fn perturbed(&self, spec: &PerturbationSpec, u: f64) -> PolyMap4 {
        PolyMap4::new(spec.apply(&self.coords, u), self.t_domain, self.theta_domain, self.topology)
    }
}

impl Parametrization for PolyMap4 {
    fn t_domain(&self) -> Interval {
        self.t_domain
    }
    fn theta_domain(&self) -> Interval {
        self.theta_domain
    }
    fn topology(&self) -> Topology {
        self.topology
    }
    fn eval(&self, t: f64, s: f64) -> [f64; 4] {
        std::array::from_fn(|i| self.coords[i].eval(t, s))
    }
    fn jet(&self, t: f64, s: f64) -> Jet {
        Jet {
            value: self.eval(t, s),
            dt: std::array::from_fn(|i| self.dt[i].eval(t, s)),
            dtheta: std::array::from_fn(|i| self.ds[i].eval(t, s)),
        }
    }
}
