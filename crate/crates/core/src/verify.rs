//! Sampling-based checks that a surface behaves as an embedding.
//!
//! Nothing here is a proof: an empty collision list means no self-intersection
//! was detected at the given resolution.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{ParamPair, PerturbationSpec};
use crate::catalog::KnotArc;
use crate::error::{Error, Result};
use crate::poly::Interval;
use crate::surface::{Parametrization, PolyMap4, Topology};

/// Outcome of [`jacobian_rank_scan`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankScan {
    pub ok: bool,
    /// Smallest `σ2/σ1` seen.
    pub min_ratio: f64,
    /// Parameter where it was seen.
    pub at: (f64, f64),
}

/// `σ2/σ1` of the 4×2 matrix with columns `u`, `v`, from the Gram matrix.
pub fn singular_ratio(u: &[f64; 4], v: &[f64; 4]) -> f64 {
    let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (a, b, c) = (dot(u, u), dot(u, v), dot(v, v));
    let m = 0.5 * (a + c);
    let l1 = m + (0.25 * (a - c) * (a - c) + b * b).sqrt();
    if l1 <= 0.0 || !l1.is_finite() {
        return 0.0;
    }
    let l2 = ((a * c - b * b) / l1).max(0.0);
    (l2 / l1).sqrt()
}

fn check_grid(n_t: usize, n_th: usize) -> Result<()> {
    if n_t < 16 || n_th < 16 {
        return Err(Error::InvalidParameter(format!("scan grid {n_t}×{n_th} is below 16×16")));
    }
    Ok(())
}

/// Rows for a scan: a half-cell inset at collapsing ends, endpoints otherwise.
fn rank_rows(iv: Interval, n: usize, poles: bool) -> Vec<f64> {
    if poles {
        let h = iv.width() / n as f64;
        (0..n).map(|i| iv.lo + (i as f64 + 0.5) * h).collect()
    } else {
        (0..n).map(|i| iv.node(i, n)).collect()
    }
}

/// Columns in θ; a periodic domain skips the duplicate end.
fn theta_cols(iv: Interval, n: usize, periodic: bool) -> Vec<f64> {
    if periodic {
        (0..n).map(|j| iv.lo + iv.width() * j as f64 / n as f64).collect()
    } else {
        (0..n).map(|j| iv.node(j, n)).collect()
    }
}

/// Check rank 2 of the Jacobian on a grid: every sample needs `σ2/σ1 > tol`.
///
/// Pole rows are skipped by insetting the grid half a cell.
pub fn jacobian_rank_scan<P: Parametrization>(s: &P, n_t: usize, n_th: usize, tol: f64) -> Result<RankScan> {
    check_grid(n_t, n_th)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("rank tolerance {tol} outside (0, 1)")));
    }
    let topo = s.topology();
    let ts = rank_rows(s.t_domain(), n_t, topo.poles);
    let ths = theta_cols(s.theta_domain(), n_th, topo.periodic_theta);
    let (min_ratio, at) = ts
        .par_iter()
        .map(|&t| {
            ths.iter()
                .map(|&th| {
                    let j = s.jet(t, th);
                    (singular_ratio(&j.dt, &j.dtheta), (t, th))
                })
                .fold((f64::INFINITY, (t, 0.0)), |a, b| if b.0 < a.0 { b } else { a })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::INFINITY, (0.0, 0.0)), |a, b| if b.0 < a.0 { b } else { a });
    Ok(RankScan { ok: min_ratio > tol, min_ratio, at })
}

/// Distance in parameter space with the surface's gluing: θ wraps when
/// periodic, and each pole row counts as a single point.
pub fn param_distance(a: (f64, f64), b: (f64, f64), t_dom: Interval, th_dom: Interval, topo: Topology) -> f64 {
    let mut dth = (a.1 - b.1).abs();
    if topo.periodic_theta {
        let w = th_dom.width();
        dth = dth.rem_euclid(w);
        dth = dth.min(w - dth);
    }
    let mut d = (a.0 - b.0).hypot(dth);
    if topo.poles {
        d = d
            .min((a.0 - t_dom.lo).abs() + (b.0 - t_dom.lo).abs())
            .min((t_dom.hi - a.0).abs() + (t_dom.hi - b.0).abs());
    }
    d
}

/// Suspected self-intersection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub a: (f64, f64),
    pub b: (f64, f64),
    /// Image distance.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityScan {
    /// Sorted by parameter, at most `max_collisions` entries.
    pub collisions: Vec<Collision>,
    pub total: usize,
    pub truncated: bool,
}

impl InjectivityScan {
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// Full sample grid for injectivity: pole rows included, seam column not.
pub fn scan_grid<P: Parametrization>(s: &P, n_t: usize, n_th: usize) -> (Vec<f64>, Vec<f64>) {
    let topo = s.topology();
    let ts = (0..n_t).map(|i| s.t_domain().node(i, n_t)).collect();
    (ts, theta_cols(s.theta_domain(), n_th, topo.periodic_theta))
}

/// Diagonal of one cell of [`scan_grid`].
pub fn grid_spacing<P: Parametrization>(s: &P, n_t: usize, n_th: usize) -> f64 {
    let dt = s.t_domain().width() / (n_t - 1) as f64;
    let cols = if s.topology().periodic_theta { n_th } else { n_th - 1 };
    dt.hypot(s.theta_domain().width() / cols as f64)
}

type Cell4 = [i64; 4];

fn cell_of(p: &[f64; 4], size: f64) -> Cell4 {
    p.map(|x| (x / size).floor() as i64)
}

fn dist4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Report sample pairs closer than `image_tol` in the image whose parameters
/// are more than `param_sep` apart.
///
/// Samples go into a uniform hash of cell size `image_tol`; each sample is
/// compared with the 3^4 cells around it, so no close pair is missed.
pub fn injectivity_scan<P: Parametrization>(
    s: &P,
    n_t: usize,
    n_th: usize,
    param_sep: f64,
    image_tol: f64,
    max_collisions: usize,
) -> Result<InjectivityScan> {
    check_grid(n_t, n_th)?;
    if !(image_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("image tolerance {image_tol} must be positive")));
    }
    let spacing = grid_spacing(s, n_t, n_th);
    if !(param_sep > 2.0 * spacing) {
        return Err(Error::InvalidParameter(format!(
            "parameter separation {param_sep} must exceed twice the grid spacing {spacing}"
        )));
    }
    let (ts, ths) = scan_grid(s, n_t, n_th);
    let params: Vec<(f64, f64)> = ts.iter().flat_map(|&t| ths.iter().map(move |&th| (t, th))).collect();
    let pts: Vec<[f64; 4]> = params.par_iter().map(|&(t, th)| s.eval(t, th)).collect();
    let mut hash: HashMap<Cell4, Vec<u32>> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        hash.entry(cell_of(p, image_tol)).or_default().push(i as u32);
    }
    let (td, thd, topo) = (s.t_domain(), s.theta_domain(), s.topology());
    let mut found: Vec<Collision> = (0..pts.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let c = cell_of(&pts[i], image_tol);
            let mut out = Vec::new();
            for k in 0..81 {
                let mut key = c;
                let mut r = k;
                for slot in key.iter_mut() {
                    *slot += (r % 3) as i64 - 1;
                    r /= 3;
                }
                let Some(bucket) = hash.get(&key) else { continue };
                for &j in bucket {
                    let j = j as usize;
                    if j <= i {
                        continue;
                    }
                    let d = dist4(&pts[i], &pts[j]);
                    if d < image_tol && param_distance(params[i], params[j], td, thd, topo) > param_sep {
                        out.push(Collision { a: params[i], b: params[j], distance: d });
                    }
                }
            }
            out
        })
        .collect();
    found.par_sort_by(|x, y| {
        (x.a.0, x.a.1, x.b.0, x.b.1)
            .partial_cmp(&(y.a.0, y.a.1, y.b.0, y.b.1))
            .expect("finite parameters")
    });
    let total = found.len();
    found.truncate(max_collisions);
    Ok(InjectivityScan { collisions: found, total, truncated: total > max_collisions })
}

/// Group collisions whose endpoints are pairwise within `radius` (in either
/// order) into clusters; returns the clusters as index lists.
pub fn cluster_collisions(c: &[Collision], radius: f64) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..c.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let key = |p: (f64, f64)| ((p.0 / radius).floor() as i64, (p.1 / radius).floor() as i64);
    let near = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).hypot(p.1 - q.1) <= radius;
    let mut hash: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, x) in c.iter().enumerate() {
        hash.entry(key(x.a)).or_default().push(i);
        hash.entry(key(x.b)).or_default().push(i);
    }
    for (i, x) in c.iter().enumerate() {
        let (ka, kb) = (key(x.a), key(x.b));
        for (k0, k1) in [ka, kb] {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(bucket) = hash.get(&(k0 + dx, k1 + dy)) else { continue };
                    for &j in bucket {
                        let y = &c[j];
                        let linked = (near(x.a, y.a) && near(x.b, y.b)) || (near(x.a, y.b) && near(x.b, y.a));
                        if linked {
                            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                            if ri != rj {
                                parent[ri.max(rj)] = ri.min(rj);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..c.len() {
        let r = find(&mut parent, i);
        let g = *slot.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Details behind [`boundary_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub ends_on_plane: bool,
    pub interior_positive: bool,
    pub transverse_lo: bool,
    pub transverse_hi: bool,
}

impl BoundaryReport {
    pub fn ok(&self) -> bool {
        self.ends_on_plane && self.interior_positive && self.transverse_lo && self.transverse_hi
    }
}

const BOUNDARY_SAMPLES: usize = 1000;

pub fn boundary_report(arc: &KnotArc) -> BoundaryReport {
    let (h, ab) = (&arc.h, arc.ab);
    let scale = h.scale_on(&ab).max(f64::MIN_POSITIVE);
    let dh = h.derive();
    BoundaryReport {
        ends_on_plane: h.eval(ab.lo).abs() <= 1e-6 * scale && h.eval(ab.hi).abs() <= 1e-6 * scale,
        interior_positive: (1..BOUNDARY_SAMPLES).all(|i| h.eval(ab.lerp(i as f64 / BOUNDARY_SAMPLES as f64)) > 0.0),
        transverse_lo: dh.eval(ab.lo) > 1e-9 * scale,
        transverse_hi: dh.eval(ab.hi) < -1e-9 * scale,
    }
}

/// The arc meets the boundary plane only at its ends, and transversely.
pub fn boundary_check(arc: &KnotArc) -> bool {
    boundary_report(arc).ok()
}

/// Parameter pairs with equal `(x, y)` images and parameters more than
/// `param_sep` apart.
///
/// Candidates are grid pairs within one grid step of each other in the
/// `(x, y)` image; each is refined by minimum-norm Gauss–Newton on
/// `(x, y)(p) = (x, y)(q)`.
pub fn xy_coincidences<P: Parametrization>(s: &P, n_t: usize, n_th: usize, param_sep: f64) -> Result<Vec<ParamPair>> {
    check_grid(n_t, n_th)?;
    let (ts, ths) = scan_grid(s, n_t, n_th);
    let params: Vec<(f64, f64)> = ts.iter().flat_map(|&t| ths.iter().map(move |&th| (t, th))).collect();
    let xy: Vec<[f64; 2]> = params
        .par_iter()
        .map(|&(t, th)| {
            let p = s.eval(t, th);
            [p[0], p[1]]
        })
        .collect();
    let idx = |i: usize, j: usize| i * ths.len() + j;
    let (rows, cols, periodic) = (ts.len() as i64, ths.len() as i64, s.topology().periodic_theta);
    let neighbours = |k: usize| {
        let (r, c) = ((k / ths.len()) as i64, (k % ths.len()) as i64);
        (-1..=1i64).flat_map(move |dr| (-1..=1i64).map(move |dc| (r + dr, c + dc))).filter_map(move |(r2, c2)| {
            let c2 = if periodic { c2.rem_euclid(cols) } else { c2 };
            let inside = (0..rows).contains(&r2) && (0..cols).contains(&c2) && (r2, c2) != (r, c);
            inside.then_some((r2 * cols + c2) as usize)
        })
    };
    let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    // Longest cell diagonal in the image bounds the distance between the
    // nearest samples of any two coincident points.
    let mut step = 0.0f64;
    for i in 0..ts.len() - 1 {
        for j in 0..ths.len() {
            let jn = (j + 1) % ths.len();
            if jn == 0 && !s.topology().periodic_theta {
                continue;
            }
            step = step
                .max(d2(xy[idx(i, j)], xy[idx(i + 1, jn)]))
                .max(d2(xy[idx(i + 1, j)], xy[idx(i, jn)]));
        }
    }
    let scale = xy.iter().fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs())).max(1.0);
    let cell = step.max(1e-12 * scale);
    let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut hash: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in xy.iter().enumerate() {
        hash.entry(key(*p)).or_default().push(i as u32);
    }
    let (td, thd, topo) = (s.t_domain(), s.theta_domain(), s.topology());
    let tol = 1e-10 * scale;
    let mut pairs: Vec<ParamPair> = (0..xy.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let (k0, k1) = key(xy[i]);
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(bucket) = hash.get(&(k0 + dx, k1 + dy)) else { continue };
                    for &j in bucket {
                        let j = j as usize;
                        if j <= i {
                            continue;
                        }
                        let d = d2(xy[i], xy[j]);
                        // Only refine pairs that no grid neighbour of either
                        // end brings closer.
                        if d > cell
                            || neighbours(i).any(|k| d2(xy[k], xy[j]) < d)
                            || neighbours(j).any(|k| d2(xy[i], xy[k]) < d)
                        {
                            continue;
                        }
                        if let Some((p, q)) = refine_xy(s, params[i], params[j], tol) {
                            if param_distance(p, q, td, thd, topo) > param_sep {
                                out.push((p, q));
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    // Many candidates refine to nearly the same pair; keep one per
    // half-cell in each of the four parameters.
    let qt = 0.5 * td.width() / (n_t - 1) as f64;
    let qth = 0.5 * (ths[1] - ths[0]);
    let qkey = |x: &ParamPair| {
        [(x.0 .0 / qt), (x.0 .1 / qth), (x.1 .0 / qt), (x.1 .1 / qth)].map(|v| v.round() as i64)
    };
    pairs.par_sort_by(|x, y| {
        qkey(x).cmp(&qkey(y)).then((x.0 .0, x.0 .1, x.1 .0, x.1 .1).partial_cmp(&(y.0 .0, y.0 .1, y.1 .0, y.1 .1)).expect("finite"))
    });
    pairs.dedup_by(|x, y| qkey(x) == qkey(y));
    Ok(pairs)
}

fn clamp_param<P: Parametrization>(s: &P, p: (f64, f64)) -> (f64, f64) {
    let (td, thd) = (s.t_domain(), s.theta_domain());
    let th = if s.topology().periodic_theta {
        thd.lo + (p.1 - thd.lo).rem_euclid(thd.width())
    } else {
        p.1.clamp(thd.lo, thd.hi)
    };
    (p.0.clamp(td.lo, td.hi), th)
}

fn refine_xy<P: Parametrization>(s: &P, mut p: (f64, f64), mut q: (f64, f64), tol: f64) -> Option<ParamPair> {
    for _ in 0..30 {
        let (jp, jq) = (s.jet(p.0, p.1), s.jet(q.0, q.1));
        let r = [jp.value[0] - jq.value[0], jp.value[1] - jq.value[1]];
        if r[0].hypot(r[1]) <= tol {
            return Some((p, q));
        }
        // Rows of the 2×4 Jacobian in (p.t, p.θ, q.t, q.θ).
        let rows = [
            [jp.dt[0], jp.dtheta[0], -jq.dt[0], -jq.dtheta[0]],
            [jp.dt[1], jp.dtheta[1], -jq.dt[1], -jq.dtheta[1]],
        ];
        let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (a, b, c) = (dot(&rows[0], &rows[0]), dot(&rows[0], &rows[1]), dot(&rows[1], &rows[1]));
        let damp = 1e-14 * (a + c);
        let (a, c) = (a + damp, c + damp);
        let det = a * c - b * b;
        if !(det > 0.0) {
            return None;
        }
        let y = [(c * r[0] - b * r[1]) / det, (a * r[1] - b * r[0]) / det];
        let step: [f64; 4] = std::array::from_fn(|k| rows[0][k] * y[0] + rows[1][k] * y[1]);
        p = clamp_param(s, (p.0 - step[0], p.1 - step[1]));
        q = clamp_param(s, (q.0 - step[2], q.1 - step[3]));
    }
    let (vp, vq) = (s.eval(p.0, p.1), s.eval(q.0, q.1));
    ((vp[0] - vq[0]).hypot(vp[1] - vq[1]) <= tol).then_some((p, q))
}

/// Grid, tolerances and caps shared by the scans.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub grid: (usize, usize),
    pub rank_tol: f64,
    pub image_tol: f64,
    pub param_sep: f64,
    pub max_collisions: usize,
}

impl ScanOptions {
    /// `param_sep` set to `factor` cell diagonals of `s`'s grid.
    pub fn for_surface<P: Parametrization>(
        s: &P,
        grid: (usize, usize),
        rank_tol: f64,
        image_tol: f64,
        factor: f64,
        max_collisions: usize,
    ) -> ScanOptions {
        let param_sep = factor * grid_spacing(s, grid.0.max(2), grid.1.max(2));
        ScanOptions { grid, rank_tol, image_tol, param_sep, max_collisions }
    }
}

/// Everything the `verify` command reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rank_ok: bool,
    pub min_singular_ratio: f64,
    pub min_ratio_at: (f64, f64),
    pub collisions: Vec<Collision>,
    pub collision_total: usize,
    pub collisions_truncated: bool,
    /// `None` when the surface did not come from an arc.
    pub boundary_ok: Option<bool>,
    pub grid: (usize, usize),
    pub tolerances: ScanOptions,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rank_ok && self.collision_total == 0 && self.boundary_ok.unwrap_or(true)
    }
}

pub fn verify_surface<P: Parametrization>(s: &P, arc: Option<&KnotArc>, opt: &ScanOptions) -> Result<VerifyReport> {
    let (n_t, n_th) = opt.grid;
    let rank = jacobian_rank_scan(s, n_t, n_th, opt.rank_tol)?;
    let inj = injectivity_scan(s, n_t, n_th, opt.param_sep, opt.image_tol, opt.max_collisions)?;
    Ok(VerifyReport {
        rank_ok: rank.ok,
        min_singular_ratio: rank.min_ratio,
        min_ratio_at: rank.at,
        collisions: inj.collisions,
        collision_total: inj.total,
        collisions_truncated: inj.truncated,
        boundary_ok: arc.map(boundary_check),
        grid: opt.grid,
        tolerances: *opt,
    })
}

/// Scan results for one member `F_u` of the perturbation family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub u: f64,
    pub rank_ok: bool,
    pub min_ratio: f64,
    pub collisions: usize,
}

impl FamilyMember {
    pub fn ok(&self) -> bool {
        self.rank_ok && self.collisions == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub epsilon: f64,
    pub members: Vec<FamilyMember>,
}

impl FamilyReport {
    pub fn ok(&self) -> bool {
        self.members.iter().all(FamilyMember::ok)
    }
}

/// Run the rank and injectivity scans on `F_u = map + u·(0, 0, δz t^e, δw s^e)`
/// for each `u`. `map` is expected on `[-1, 1]^2`, where the perturbation
/// is defined.
pub fn isotopy_family_check(
    map: &PolyMap4,
    spec: &PerturbationSpec,
    u_samples: &[f64],
    opt: &ScanOptions,
) -> Result<FamilyReport> {
    let mut members = Vec::with_capacity(u_samples.len());
    for &u in u_samples {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidParameter(format!("family parameter {u} outside [0, 1]")));
        }
        let fu = map.perturbed(spec, u);
        let rank = jacobian_rank_scan(&fu, opt.grid.0, opt.grid.1, opt.rank_tol)?;
        let inj = injectivity_scan(&fu, opt.grid.0, opt.grid.1, opt.param_sep, opt.image_tol, opt.max_collisions)?;
        members.push(FamilyMember { u, rank_ok: rank.ok, min_ratio: rank.min_ratio, collisions: inj.total });
    }
    Ok(FamilyReport { epsilon: spec.epsilon, members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::odd_perturbation;
    use crate::catalog::{get_knot, CATALOG};
    use crate::poly::Poly1;
    use crate::spin::{polynomial_spin, spin};
    use crate::surface::{Expr, Surface4};
    use nalgebra::Matrix4;

    fn plane(x: Expr, y: Expr) -> Surface4 {
        let unit = Interval::symmetric(1.0);
        Surface4 {
            coords: [x, y, Expr::zero(), Expr::zero()],
            t_domain: unit,
            theta_domain: unit,
            topology: Topology::OPEN,
        }
    }

    fn t() -> Expr {
        Expr::poly_t(Poly1::identity())
    }

    #[test]
    fn rank_of_plane_and_line() {
        let th = Expr::PolyTheta { poly: Poly1::identity() };
        let r = jacobian_rank_scan(&plane(t(), th), 32, 32, 1e-6).unwrap();
        assert!(r.ok);
        assert!((r.min_ratio - 1.0).abs() < 1e-15);
        let r = jacobian_rank_scan(&plane(t(), t()), 32, 32, 1e-6).unwrap();
        assert!(!r.ok);
        assert_eq!(r.min_ratio, 0.0);
        assert!(jacobian_rank_scan(&plane(t(), t()), 8, 32, 1e-6).is_err());
        assert!(jacobian_rank_scan(&plane(t(), t()), 32, 32, 1.0).is_err());
    }

    #[test]
    fn spun_trefoil_is_an_immersion() {
        let r = jacobian_rank_scan(&spin(&get_knot("trefoil_spun").unwrap()), 200, 200, 1e-4).unwrap();
        assert!(r.ok, "{r:?}");
    }

    #[test]
    fn rank_ratio_is_rotation_invariant() {
        let s = spin(&get_knot("trefoil_spun").unwrap());
        // Orthogonal matrix from a QR factorization of a fixed matrix.
        let m = Matrix4::new(1.0, 2.0, 0.5, -1.0, 0.3, -1.0, 2.0, 0.0, 1.5, 0.2, 0.1, 1.0, -0.7, 0.4, 1.0, 2.0);
        let q = m.qr().q();
        for &(tt, th) in &[(-1.5, 0.3), (0.1, 2.0), (1.9, 5.5)] {
            let j = s.jet(tt, th);
            let rot = |v: [f64; 4]| {
                let r = q * nalgebra::Vector4::from(v);
                [r[0], r[1], r[2], r[3]]
            };
            let a = singular_ratio(&j.dt, &j.dtheta);
            let b = singular_ratio(&rot(j.dt), &rot(j.dtheta));
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn parameter_metric_respects_gluing() {
        let td = Interval::new(-2.0, 2.0).unwrap();
        let thd = Interval::new(0.0, 6.0).unwrap();
        let d = param_distance((0.0, 0.1), (0.0, 5.9), td, thd, Topology::SPHERE);
        assert!((d - 0.2).abs() < 1e-12);
        let d = param_distance((-1.9, 0.0), (-1.95, 3.0), td, thd, Topology::SPHERE);
        assert!((d - 0.15).abs() < 1e-12);
        let d = param_distance((0.0, 0.1), (0.0, 5.9), td, thd, Topology::OPEN);
        assert!((d - 5.8).abs() < 1e-12);
    }

    fn default_scan<P: Parametrization>(s: &P, n: usize, tol: f64) -> InjectivityScan {
        let sep = 4.0 * grid_spacing(s, n, n);
        injectivity_scan(s, n, n, sep, tol, 1000).unwrap()
    }

    #[test]
    fn spun_unknot_has_no_collisions() {
        let s = spin(&get_knot("unknot").unwrap());
        assert!(default_scan(&s, 100, 1e-3).is_empty());
    }

    #[test]
    fn spun_catalog_has_no_collisions() {
        for name in CATALOG {
            let s = spin(&get_knot(name).unwrap());
            assert!(default_scan(&s, 400, 1e-3).is_empty(), "{name}");
        }
    }

    #[test]
    fn projection_of_spun_trefoil_self_intersects() {
        // (x, z, w) identifies (t, θ) with (-t, θ) where x(t) = 0, i.e. at
        // t = ±√3: a double circle.
        let s = spin(&get_knot("trefoil_spun").unwrap()).select([0, 2, 3]).unwrap();
        let scan = injectivity_scan(&s, 400, 400, 0.3, 0.1, 100_000).unwrap();
        assert!(!scan.is_empty());
        assert!(!scan.truncated);
        let clusters = cluster_collisions(&scan.collisions, 0.1);
        let r3 = 3f64.sqrt();
        assert!(clusters.iter().any(|g| g.iter().any(|&i| {
            let c = scan.collisions[i];
            (c.a.0.abs() - r3).abs() < 0.05 && (c.a.0 + c.b.0).abs() < 0.05
        })));
    }

    #[test]
    fn separation_must_exceed_grid() {
        let s = spin(&get_knot("unknot").unwrap());
        assert!(injectivity_scan(&s, 100, 100, 0.01, 1e-3, 10).is_err());
    }

    #[test]
    fn clustering_links_nearby_pairs() {
        let c = |a: f64, b: f64| Collision { a: (a, 0.0), b: (b, 0.0), distance: 0.0 };
        let cs = [c(0.0, 1.0), c(0.01, 1.01), c(1.02, 0.02), c(5.0, 6.0)];
        let g = cluster_collisions(&cs, 0.05);
        assert_eq!(g, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn boundary_examples() {
        assert!(boundary_check(&get_knot("trefoil_spun").unwrap()));
        assert!(boundary_check(&get_knot("trefoil_twist").unwrap()));
        let h = Poly1::new(vec![1.0, 0.0, -1.0]);
        let tangent = KnotArc {
            name: "tangent".into(),
            f: Poly1::identity(),
            g: Poly1::zero(),
            h: &h * &h,
            ab: Interval::symmetric(1.0),
            crossing_iv: Interval::new(0.0, 0.0).unwrap(),
            crossings: vec![],
            axis_hint: None,
        };
        let r = boundary_report(&tangent);
        assert!(r.ends_on_plane && r.interior_positive);
        assert!(!r.transverse_lo && !r.transverse_hi);
        assert!(!boundary_check(&tangent));
    }

    #[test]
    fn xy_pairs_of_a_fold() {
        // x = t^2, y = θ on the square: (t, θ) and (-t, θ) coincide.
        let s = plane(Expr::poly_t(Poly1::monomial(1.0, 2)), Expr::PolyTheta { poly: Poly1::identity() });
        let pairs = xy_coincidences(&s, 33, 17, 0.5).unwrap();
        assert!(!pairs.is_empty());
        for ((t1, s1), (t2, s2)) in pairs {
            assert!((t1 * t1 - t2 * t2).abs() < 1e-9);
            assert!((s1 - s2).abs() < 1e-9);
            assert!((t1 - t2).abs() > 0.5);
        }
    }

    #[test]
    fn family_with_u_zero_is_the_map() {
        let arc = get_knot("unknot").unwrap();
        let map = polynomial_spin(&arc, 8).unwrap().map.to_unit_square();
        let pairs = xy_coincidences(&map, 32, 32, 4.0 * grid_spacing(&map, 32, 32)).unwrap();
        let (spec, _) = odd_perturbation(map.coords(), 2, &pairs).unwrap();
        let opt = ScanOptions::for_surface(&map, (100, 100), 1e-6, 1e-3, 4.0, 100);
        let rep = isotopy_family_check(&map, &spec, &[0.0], &opt).unwrap();
        let direct = jacobian_rank_scan(&map, 100, 100, 1e-6).unwrap();
        assert!(rep.ok());
        assert_eq!(rep.members[0].min_ratio, direct.min_ratio);
    }

    #[test]
    fn perturbed_spun_trefoil_family() {
        let arc = get_knot("trefoil_spun").unwrap();
        let map = polynomial_spin(&arc, 8).unwrap().map.to_unit_square();
        let opt = ScanOptions::for_surface(&map, (400, 400), 1e-6, 1e-3, 4.0, 100);
        let pairs = xy_coincidences(&map, 128, 128, opt.param_sep).unwrap();
        let (spec, _) = odd_perturbation(map.coords(), 2, &pairs).unwrap();
        // Same-row pairs and the strand crossings both show up.
        assert!(pairs.iter().any(|p| p.0 .0 == p.1 .0));
        assert!(pairs.iter().any(|p| (p.0 .0 - p.1 .0).abs() > 0.1));
        let rep = isotopy_family_check(&map, &spec, &[0.0, 0.5, 1.0], &opt).unwrap();
        assert!(spec.epsilon > 0.0);
        assert!(rep.ok());
    }
}
