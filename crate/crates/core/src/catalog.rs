//! Built-in polynomial long knots, height lifting, and double points of the
//! plane projection `t -> (f(t), g(t))`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{roots_in_interval, Interval, Poly1, Poly2};

/// Relative tolerance for the roots of `h`.
pub const ROOT_TOL: f64 = 1e-12;
/// Minimum parameter gap for a double point.
pub const DELTA_DIAG: f64 = 1e-3;
/// Grid resolution of the double-point candidate scan.
pub const DOUBLE_POINT_GRID: usize = 600;
/// Candidates closer than this in parameter space are the same double point.
pub const MERGE_TOL: f64 = 1e-4;
/// Residual bound on `|f(s) - f(t)|`, `|g(s) - g(t)|` after refinement.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Granularity of the lifting constant `R`.
pub const LIFT_STEP: f64 = 1e-3;

/// A knotted arc `t -> (f, g, h)` on `ab`, with `h` vanishing at both ends
/// and positive in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnotArc {
    pub name: String,
    pub f: Poly1,
    pub g: Poly1,
    pub h: Poly1,
    pub ab: Interval,
    /// Smallest interval containing every crossing parameter.
    pub crossing_iv: Interval,
    /// Parameter pairs `(s, t)`, `s < t`, with equal `(f, g)`.
    pub crossings: Vec<(f64, f64)>,
    /// Default twist axis parameters, if the arc has one.
    #[serde(default)]
    pub axis_hint: Option<(f64, f64)>,
}

impl KnotArc {
    /// Validate an arc: `h` must have exactly two roots in `search`, be
    /// positive between them, and separate the strands at every crossing.
    pub fn new(name: &str, f: Poly1, g: Poly1, h: Poly1, search: Interval) -> Result<KnotArc> {
        let ab = height_interval(&h, search)
            .ok_or_else(|| Error::InvalidKnot(format!("{name}: h needs exactly two roots with h > 0 between them")))?;
        let crossings = plane_double_points(&f, &g, ab)?;
        let crossing_iv = match (
            crossings.iter().map(|c| c.0).reduce(f64::min),
            crossings.iter().map(|c| c.1).reduce(f64::max),
        ) {
            (Some(lo), Some(hi)) => Interval::new(lo, hi)?,
            _ => Interval::new(ab.mid(), ab.mid())?,
        };
        let scale = h.scale_on(&ab);
        for &(s, t) in &crossings {
            if (h.eval(s) - h.eval(t)).abs() <= 1e-9 * scale {
                return Err(Error::InvalidKnot(format!(
                    "{name}: strands meet at parameters {s} and {t}"
                )));
            }
        }
        Ok(KnotArc {
            name: name.to_string(),
            f,
            g,
            h,
            ab,
            crossing_iv,
            crossings,
            axis_hint: None,
        })
    }

    pub fn eval(&self, t: f64) -> [f64; 3] {
        [self.f.eval(t), self.g.eval(t), self.h.eval(t)]
    }

    pub fn degrees(&self) -> [usize; 3] {
        [&self.f, &self.g, &self.h].map(|p| p.degree().unwrap_or(0))
    }

    pub fn with_axis_hint(mut self, t1: f64, t2: f64) -> Self {
        self.axis_hint = Some((t1, t2));
        self
    }
}

/// `[a, b]` if `h` has exactly two roots in `search` and is positive inside.
fn height_interval(h: &Poly1, search: Interval) -> Option<Interval> {
    let roots = roots_in_interval(h, search, ROOT_TOL).ok()?;
    if roots.len() != 2 || roots.iter().any(|r| r.even_multiplicity) {
        return None;
    }
    let ab = Interval::new(roots[0].x, roots[1].x).ok()?;
    let positive = (1..1000).all(|i| h.eval(ab.lerp(i as f64 / 1000.0)) > 0.0);
    positive.then_some(ab)
}

/// Names of the built-in knots.
pub const CATALOG: [&str; 4] = ["trefoil_spun", "trefoil_twist", "figure8_spun", "unknot"];

fn trefoil_fg() -> (Poly1, Poly1) {
    (
        Poly1::new(vec![0.0, -3.0, 0.0, 1.0]),
        Poly1::new(vec![0.0, -10.0, 0.0, 0.0, 0.0, 1.0]),
    )
}

/// A display embedding of the long trefoil with a degree-6 height.
/// Kept for reference only; no construction uses it.
pub fn display_trefoil() -> [Poly1; 3] {
    [
        Poly1::new(vec![0.0, -3.0, 0.0, 1.0]),
        Poly1::new(vec![0.0, 0.0, -4.0, 0.0, 1.0]),
        Poly1::new(vec![12.0, 6.48, -3.24, -8.48, 4.24, 2.0, -1.0]),
    ]
}

pub fn get_knot(name: &str) -> Result<KnotArc> {
    let search = Interval::symmetric(4.0);
    match name {
        "trefoil_spun" => {
            let (f, g) = trefoil_fg();
            let h = Poly1::new(vec![3.0, 0.0, 4.0, 0.0, -1.0]);
            Ok(KnotArc::new(name, f, g, h, search)?.with_axis_hint(-2.05, 2.05))
        }
        "trefoil_twist" => {
            let (f, g) = trefoil_fg();
            let h = Poly1::new(vec![16.0, 0.0, 4.0, 0.0, -1.0]);
            Ok(KnotArc::new(name, f, g, h, search)?.with_axis_hint(-2.19, 2.19))
        }
        "figure8_spun" => {
            // (2/5)(t^2 - 7)(t^2 - 10) t and (1/10) t (t^2 - 4)(t^2 - 9)(t^2 - 12)
            let sq = |c: f64| Poly1::new(vec![-c, 0.0, 1.0]);
            let t = Poly1::identity();
            let f = (&(&sq(7.0) * &sq(10.0)) * &t).scale(0.4);
            let g = (&(&(&sq(4.0) * &sq(9.0)) * &sq(12.0)) * &t).scale(0.1);
            let h = Poly1::new(vec![20.0, 0.0, -13.0, 0.0, -1.0]);
            Ok(KnotArc::new(name, f, g, h, search)?.with_axis_hint(-0.9, 0.9))
        }
        "unknot" => {
            let f = Poly1::identity();
            let h = Poly1::new(vec![1.0, 0.0, -1.0]);
            Ok(KnotArc::new(name, f, Poly1::zero(), h, search)?.with_axis_hint(-0.5, 0.5))
        }
        other => Err(Error::UnknownKnot(other.to_string())),
    }
}

/// User knot definition as read from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KnotDef {
    #[serde(default)]
    pub name: Option<String>,
    pub f: Poly1,
    pub g: Poly1,
    pub h: Poly1,
    /// Where to look for the roots of `h`.
    pub interval_hint: Interval,
    #[serde(default)]
    pub axis: Option<(f64, f64)>,
}

impl KnotDef {
    pub fn build(&self) -> Result<KnotArc> {
        let name = self.name.clone().unwrap_or_else(|| "user".to_string());
        let arc = KnotArc::new(&name, self.f.clone(), self.g.clone(), self.h.clone(), self.interval_hint)?;
        Ok(match self.axis {
            Some((t1, t2)) => arc.with_axis_hint(t1, t2),
            None => arc,
        })
    }
}

/// Load a knot by catalog name, or from a JSON definition file if `spec`
/// names an existing path.
pub fn load_knot(spec: &str) -> Result<KnotArc> {
    if CATALOG.contains(&spec) {
        return get_knot(spec);
    }
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let def: KnotDef = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidKnot(format!("{spec}: {e}")))?;
        return def.build();
    }
    Err(Error::UnknownKnot(spec.to_string()))
}

/// Cauchy-type bound (Fujiwara) on the magnitude of every complex root.
pub fn root_bound(p: &Poly1) -> f64 {
    let n = match p.degree() {
        Some(n) if n > 0 => n,
        _ => return 1.0,
    };
    let lead = p.leading();
    let c = p.coeffs();
    let mut b = 0.0_f64;
    for i in 1..n {
        b = b.max((c[n - i] / lead).abs().powf(1.0 / i as f64));
    }
    b = b.max((c[0] / (2.0 * lead)).abs().powf(1.0 / n as f64));
    2.0 * b
}

/// Shift `h0` up by the smallest multiple `R` of [`LIFT_STEP`] such that the
/// result has exactly two real roots `a < b`, is positive on `(a, b)`, and
/// every double point of `(f, g)` found in `search` lies in `[a, b]`.
pub fn lift_height(h0: &Poly1, f: &Poly1, g: &Poly1, search: Interval) -> Result<(Poly1, Interval, f64)> {
    let deg = h0.degree().unwrap_or(0);
    if deg == 0 || deg % 2 == 1 {
        return Err(Error::UnliftableHeight(format!("degree {deg} is not a positive even number")));
    }
    if h0.leading() >= 0.0 {
        return Err(Error::UnliftableHeight("leading coefficient must be negative".into()));
    }
    let dps = plane_double_points(f, g, search)?;
    let (lo, hi) = dps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(s, t)| {
        (lo.min(s), hi.max(t))
    });

    let shifted = |k: u64| h0 + &Poly1::constant(k as f64 * LIFT_STEP);
    let ok = |k: u64| -> Option<Interval> {
        let h = shifted(k);
        let r = root_bound(&h) * 1.01 + 1.0;
        let ab = height_interval(&h, Interval::symmetric(r))?;
        (dps.is_empty() || (ab.lo <= lo && hi <= ab.hi)).then_some(ab)
    };

    let mut hi_k: u64 = 1;
    while ok(hi_k).is_none() {
        hi_k *= 2;
        if hi_k as f64 * LIFT_STEP > 1e9 {
            return Err(Error::UnliftableHeight("no shift up to 1e9 lifts the arc".into()));
        }
    }
    let mut lo_k = hi_k / 2;
    if lo_k == 0 || ok(lo_k).is_some() {
        lo_k = 0;
    }
    // invariant: ok(hi_k), !ok(lo_k) (or lo_k = 0 unchecked)
    while hi_k - lo_k > 1 {
        let mid = lo_k + (hi_k - lo_k) / 2;
        if ok(mid).is_some() {
            hi_k = mid;
        } else {
            lo_k = mid;
        }
    }
    let ab = ok(hi_k).expect("checked above");
    Ok((shifted(hi_k), ab, hi_k as f64 * LIFT_STEP))
}

/// `(p(a) - p(b)) / (a - b)` as a polynomial in `(a, b)`.
pub fn divided_difference(p: &Poly1) -> Poly2 {
    let c = p.coeffs();
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Poly2::zero();
    }
    let mut rows = vec![vec![0.0; n]; n];
    for (k, &a) in c.iter().enumerate().skip(1) {
        for i in 0..k {
            rows[i][k - 1 - i] += a;
        }
    }
    Poly2::from_rows(rows)
}

struct System {
    f: Poly1,
    g: Poly1,
    df: Poly1,
    dg: Poly1,
    ff: Poly2,
    gg: Poly2,
    ff_a: Poly2,
    ff_b: Poly2,
    gg_a: Poly2,
    gg_b: Poly2,
}

impl System {
    fn new(f: &Poly1, g: &Poly1) -> Self {
        let ff = divided_difference(f);
        let gg = divided_difference(g);
        System {
            f: f.clone(),
            g: g.clone(),
            df: f.derive(),
            dg: g.derive(),
            ff_a: ff.derive_t(),
            ff_b: ff.derive_s(),
            gg_a: gg.derive_t(),
            gg_b: gg.derive_s(),
            ff,
            gg,
        }
    }

    /// Newton on the divided-difference system from `(a, b)`.
    fn newton(&self, mut a: f64, mut b: f64) -> Option<(f64, f64)> {
        for _ in 0..60 {
            let (u, v) = (self.ff.eval(a, b), self.gg.eval(a, b));
            let (j11, j12) = (self.ff_a.eval(a, b), self.ff_b.eval(a, b));
            let (j21, j22) = (self.gg_a.eval(a, b), self.gg_b.eval(a, b));
            let det = j11 * j22 - j12 * j21;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let da = (u * j22 - v * j12) / det;
            let db = (j11 * v - j21 * u) / det;
            a -= da;
            b -= db;
            if !(a.is_finite() && b.is_finite()) {
                return None;
            }
            if da.abs().max(db.abs()) <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
                break;
            }
        }
        Some((a, b))
    }

    fn residual(&self, s: f64, t: f64) -> (f64, f64) {
        ((self.f.eval(s) - self.f.eval(t)).abs(), (self.g.eval(s) - self.g.eval(t)).abs())
    }

    /// `|v_s × v_t| / (|v_s| |v_t|)` for the tangents of the two strands.
    fn transversality(&self, s: f64, t: f64) -> f64 {
        let (a1, a2) = (self.df.eval(s), self.dg.eval(s));
        let (b1, b2) = (self.df.eval(t), self.dg.eval(t));
        let n = a1.hypot(a2) * b1.hypot(b2);
        if n == 0.0 {
            return 0.0;
        }
        (a1 * b2 - a2 * b1).abs() / n
    }
}

fn sign_change(v: &[f64]) -> bool {
    let pos = v.iter().any(|&x| x >= 0.0);
    let neg = v.iter().any(|&x| x <= 0.0);
    pos && neg
}

/// Double points of the plane curve `(f, g)` on `iv`: pairs `s < t` with
/// `t - s > DELTA_DIAG` and `(f(s), g(s)) = (f(t), g(t))`.
///
/// The diagonal is divided out first, so the scan works on the system
/// `[f](s,t) = [g](s,t) = 0` of divided differences. Candidate cells come
/// from sign changes of both components on a 600×600 grid (each 2×2 block
/// of cells), then Newton polishes every candidate.
pub fn plane_double_points(f: &Poly1, g: &Poly1, iv: Interval) -> Result<Vec<(f64, f64)>> {
    let sys = System::new(f, g);
    if sys.ff.is_zero() && sys.gg.is_zero() {
        return Err(Error::DegenerateInput("both coordinates are constant".into()));
    }
    if sys.ff.is_zero() || sys.gg.is_zero() {
        // One coordinate is constant, so every zero of the other divided
        // difference is a double point; they come in curves unless there
        // are none at all.
        let other = if sys.ff.is_zero() { &sys.gg } else { &sys.ff };
        let m = DOUBLE_POINT_GRID;
        for i in 0..=m {
            for j in i + 1..=m {
                let (s, t) = (iv.node(i, m + 1), iv.node(j, m + 1));
                if other.eval(s, t) * other.eval(iv.lo, iv.lo) <= 0.0 {
                    return Err(Error::NonGeneric { s, t });
                }
            }
        }
        return Ok(Vec::new());
    }
    let n = DOUBLE_POINT_GRID;
    let xs: Vec<f64> = (0..=n).map(|i| iv.node(i, n + 1)).collect();
    let vals: Vec<Vec<(f64, f64)>> = (0..=n)
        .into_par_iter()
        .map(|i| (0..=n).map(|j| (sys.ff.eval(xs[i], xs[j]), sys.gg.eval(xs[i], xs[j]))).collect())
        .collect();

    let candidates: Vec<(f64, f64)> = (0..n - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let vals = &vals;
            let xs = &xs;
            (i..n - 1).filter_map(move |j| {
                let mut fv = [0.0; 9];
                let mut gv = [0.0; 9];
                for di in 0..3 {
                    for dj in 0..3 {
                        let (a, b) = vals[i + di][j + dj];
                        fv[di * 3 + dj] = a;
                        gv[di * 3 + dj] = b;
                    }
                }
                (sign_change(&fv) && sign_change(&gv)).then(|| (xs[i + 1], xs[j + 1]))
            })
        })
        .collect();

    let slack = 1e-9 * (1.0 + iv.width());
    let refined: Vec<Result<Option<(f64, f64)>>> = candidates
        .par_iter()
        .map(|&(a, b)| {
            let Some((a, b)) = sys.newton(a, b) else { return Ok(None) };
            let (s, t) = if a < b { (a, b) } else { (b, a) };
            if t - s <= DELTA_DIAG || s < iv.lo - slack || t > iv.hi + slack {
                return Ok(None);
            }
            let (rf, rg) = sys.residual(s, t);
            if rf > RESIDUAL_TOL || rg > RESIDUAL_TOL {
                return Ok(None);
            }
            if sys.transversality(s, t) <= 1e-9 {
                return Err(Error::NonGeneric { s, t });
            }
            Ok(Some((s.clamp(iv.lo, iv.hi), t.clamp(iv.lo, iv.hi))))
        })
        .collect();

    let mut found = Vec::new();
    for r in refined {
        if let Some(p) = r? {
            found.push(p);
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in found {
        if !out
            .iter()
            .any(|q| (q.0 - p.0).abs() <= MERGE_TOL && (q.1 - p.1).abs() <= MERGE_TOL)
        {
            out.push(p);
        }
    }
    Ok(out)
}
