//! Spinning an arc about the boundary plane:
//! `(t, θ) -> (f(t), g(t), h(t) cos θ, h(t) sin θ)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::approx::{chebyshev_fit, ChebFit};
use crate::catalog::KnotArc;
use crate::error::{Error, Result};
use crate::poly::{Interval, Poly2};
use crate::surface::{Expr, PolyMap4, Surface4, Topology};

pub fn spin(arc: &KnotArc) -> Surface4 {
    let h = Expr::poly_t(arc.h.clone());
    Surface4 {
        coords: [
            Expr::poly_t(arc.f.clone()),
            Expr::poly_t(arc.g.clone()),
            Expr::product(vec![h.clone(), Expr::CosK { k: 1 }]),
            Expr::product(vec![h, Expr::SinK { k: 1 }]),
        ],
        t_domain: arc.ab,
        theta_domain: Interval { lo: 0.0, hi: TAU },
        topology: Topology::SPHERE,
    }
}

/// A spun surface with cosine and sine replaced by Chebyshev interpolants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolySpin {
    pub map: PolyMap4,
    pub cos_fit: ChebFit,
    pub sin_fit: ChebFit,
}

impl PolySpin {
    /// `max |h| · max(cos error, sin error)`, the expected deviation bound.
    pub fn error_bound(&self, arc: &KnotArc) -> f64 {
        max_abs_on(arc) * self.cos_fit.max_error.max(self.sin_fit.max_error)
    }
}

/// `max |h|` on the arc's interval, from the critical points of `h`.
pub fn max_abs_on(arc: &KnotArc) -> f64 {
    let mut m = arc.h.eval(arc.ab.lo).abs().max(arc.h.eval(arc.ab.hi).abs());
    let dh = arc.h.derive();
    if !dh.is_zero() {
        if let Ok(roots) = crate::poly::roots_in_interval(&dh, arc.ab, 1e-12) {
            for r in roots {
                m = m.max(arc.h.eval(r.x).abs());
            }
        }
    }
    m
}

/// `(f(t), g(t), h(t) C(θ), h(t) S(θ))` with `C`, `S` the degree-`cheb_degree`
/// Chebyshev interpolants of cos and sin on `[0, 2π]`.
pub fn polynomial_spin(arc: &KnotArc, cheb_degree: usize) -> Result<PolySpin> {
    if cheb_degree < 6 {
        return Err(Error::InvalidParameter(format!(
            "Chebyshev degree must be at least 6, got {cheb_degree}"
        )));
    }
    let period = Interval { lo: 0.0, hi: TAU };
    let cos_fit = chebyshev_fit(f64::cos, period, cheb_degree)?;
    let sin_fit = chebyshev_fit(f64::sin, period, cheb_degree)?;
    let coords = [
        Poly2::from_t(&arc.f),
        Poly2::from_t(&arc.g),
        Poly2::outer(&arc.h, &cos_fit.poly),
        Poly2::outer(&arc.h, &sin_fit.poly),
    ];
    let map = PolyMap4::new(coords, arc.ab, period, Topology::SPHERE);
    Ok(PolySpin { map, cos_fit, sin_fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{get_knot, CATALOG};
    use crate::surface::Parametrization;
    use crate::twist::max_deviation;
    use rand::{Rng, SeedableRng};

    #[test]
    fn spin_examples() {
        let arc = get_knot("trefoil_spun").unwrap();
        let s = spin(&arc);
        for i in 0..=10 {
            let t = arc.ab.lerp(i as f64 / 10.0);
            let p = s.eval(t, 0.0);
            assert_eq!(p, [arc.f.eval(t), arc.g.eval(t), arc.h.eval(t), 0.0]);
        }
        let p = s.eval(0.0, std::f64::consts::FRAC_PI_2);
        assert_eq!([p[0], p[1], p[3]], [0.0, 0.0, 3.0]);
        assert!(p[2].abs() < 1e-15);
    }

    #[test]
    fn spin_invariants() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for name in CATALOG {
            let arc = get_knot(name).unwrap();
            let s = spin(&arc);
            for _ in 0..200 {
                let t = rng.gen_range(arc.ab.lo..arc.ab.hi);
                let th = rng.gen_range(0.0..TAU);
                let p = s.eval(t, th);
                let h = arc.h.eval(t);
                assert!((p[2] * p[2] + p[3] * p[3] - h * h).abs() <= 1e-10 * (1.0 + h * h));
                for th in [0.0, std::f64::consts::PI] {
                    assert!(s.eval(t, th)[3].abs() <= 1e-12 * (1.0 + h.abs()));
                }
            }
            for t in [arc.ab.lo, arc.ab.hi] {
                let p0 = s.eval(t, 0.0);
                for j in 0..50 {
                    let p = s.eval(t, TAU * j as f64 / 50.0);
                    for m in 0..4 {
                        assert!((p[m] - p0[m]).abs() <= 1e-9, "{name}");
                    }
                }
            }
        }
    }

    #[test]
    fn polynomial_spin_trefoil() {
        let arc = get_knot("trefoil_spun").unwrap();
        let ps = polynomial_spin(&arc, 8).unwrap();
        let c = ps.map.coords();
        assert_eq!(c[2].degrees(), Some((4, 8)));
        assert_eq!(c[3].degrees(), Some((4, 8)));
        assert_eq!(c[0], Poly2::from_t(&arc.f));
        let exact = spin(&arc);
        let dev8 = max_deviation(&exact, &ps.map, 200);
        assert!((max_abs_on(&arc) - 7.0).abs() < 1e-12);
        assert!(dev8 <= ps.error_bound(&arc) * 1.0001, "{dev8}");
        assert!(dev8 <= 3.0 * 0.01 * 7.0 / 3.0);
        let ps12 = polynomial_spin(&arc, 12).unwrap();
        assert!(max_deviation(&exact, &ps12.map, 200) < dev8);
        assert!(polynomial_spin(&arc, 5).is_err());
    }

    #[test]
    fn polynomial_spin_bound_holds_for_catalog() {
        for name in CATALOG {
            let arc = get_knot(name).unwrap();
            let ps = polynomial_spin(&arc, 8).unwrap();
            let dev = max_deviation(&spin(&arc), &ps.map, 100);
            assert!(dev <= ps.error_bound(&arc) * 1.0001, "{name}: {dev}");
        }
    }
}
