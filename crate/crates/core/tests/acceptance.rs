//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails afterwards if any criterion did.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use spun4d::approx::{bernstein_fit2, bernstein_lattice, chebyshev_fit, odd_perturbation};
use spun4d::catalog::{get_knot, plane_double_points, CATALOG};
use spun4d::export::{coordinate_range, project, sample_surface, sweep, sweep_values, to_mesh, Projection};
use spun4d::spin::{max_abs_on, polynomial_spin, spin};
use spun4d::surface::{Parametrization, PolyMap4, Topology};
use spun4d::twist::{axis_rotation, choose_bump, max_deviation, rodrigues, twist_spin, Bump, TwistAxis};
use spun4d::verify::{cluster_collisions, injectivity_scan, isotopy_family_check, jacobian_rank_scan, xy_coincidences, ScanOptions};
use spun4d::{roots_in_interval, Interval, Poly1, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn run(n: usize, name: &str, limit_s: u64, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let r = f();
    let dt = start.elapsed();
    let in_time = dt <= Duration::from_secs(limit_s);
    let (pass, detail) = match r {
        Ok(o) => (o.pass && in_time, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {n:>2} {}: {name} — {detail} [{:.2} s, limit {limit_s} s{}]",
        if pass { "PASS" } else { "FAIL" },
        dt.as_secs_f64(),
        if in_time { "" } else { ", exceeded" }
    );
    pass
}

fn c1_roots() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut found = Vec::new();
    for (name, r) in [("trefoil_spun", 2.1554), ("trefoil_twist", 2.54404)] {
        let h = get_knot(name)?.h;
        let roots = roots_in_interval(&h, Interval::symmetric(5.0), 1e-12)?;
        let xs: Vec<f64> = roots.iter().map(|r| r.x).collect();
        if xs.len() != 2 {
            return outcome(false, format!("{name}: {} roots", xs.len()));
        }
        worst = worst.max((xs[0] + r).abs()).max((xs[1] - r).abs());
        found.push(format!("{name} ±{:.6}", xs[1]));
    }
    outcome(worst <= 1e-3, format!("{} (max diff {worst:.1e})", found.join(", ")))
}

fn c2_chebyshev() -> Result<Outcome> {
    let iv = Interval::new(0.0, 2.0 * PI)?;
    let c = chebyshev_fit(f64::cos, iv, 8)?;
    let s = chebyshev_fit(f64::sin, iv, 8)?;
    // as printed, highest degree first
    let printed = |hi_first: &[f64]| Poly1::new(hi_first.iter().rev().copied().collect());
    let pc = printed(&[-0.0000193235, 0.000485652, -0.00399024, 0.0081095, 0.0265068, 0.0163844, -0.509175, 0.00205416, 0.999921]);
    let ps = printed(&[
        8.73651067430188e-19,
        0.000144829,
        -0.00318496,
        0.0220637,
        -0.0322337,
        -0.125592,
        -0.0257364,
        1.00614,
        -0.000238495,
    ]);
    let n = 10_000;
    let (mut dc, mut ds) = (0.0f64, 0.0f64);
    for i in 0..=n {
        let x = iv.node(i, n + 1);
        dc = dc.max((c.poly.eval(x) - pc.eval(x)).abs());
        ds = ds.max((s.poly.eval(x) - ps.eval(x)).abs());
    }
    let pass = c.max_error <= 0.01 && s.max_error <= 0.01 && dc <= 0.05 && ds <= 0.05;
    outcome(
        pass,
        format!(
            "fit error cos {:.2e}, sin {:.2e}; vs printed C {dc:.2e}, S {ds:.2e}",
            c.max_error, s.max_error
        ),
    )
}

fn c3_rotations() -> Result<Outcome> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(20_240_501);
    let (mut orth, mut det, mut fix, mut group) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let inf = |m: Matrix3<f64>| m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for _ in 0..1000 {
        let k = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if k.norm() < 1e-3 {
            continue;
        }
        let k = k.normalize();
        let (a, b) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let r = rodrigues(k, a)?;
        orth = orth.max(inf(r.transpose() * r - Matrix3::identity()));
        det = det.max((r.determinant() - 1.0).abs());
        fix = fix.max((r * k - k).amax());
        group = group.max(inf(r * rodrigues(k, b)? - rodrigues(k, a + b)?));
    }
    let arc = get_knot("trefoil_twist")?;
    let axis = TwistAxis::from_hint(&arc)?;
    let mut pq = 0.0f64;
    for j in 0..64 {
        let m = axis_rotation(&axis, 2.0 * PI * j as f64 / 64.0);
        for p in [axis.p, axis.q] {
            let q = m.apply(p);
            pq = pq.max((0..3).map(|i| (q[i] - p[i]).abs()).fold(0.0, f64::max));
        }
    }
    let pass = orth <= 1e-10 && det <= 1e-10 && fix <= 1e-10 && group <= 1e-10 && pq <= 1e-9;
    outcome(
        pass,
        format!("‖RᵀR−I‖ {orth:.1e}, |det−1| {det:.1e}, axis {fix:.1e}, group law {group:.1e}, P/Q moved {pq:.1e}"),
    )
}

fn c4_bump() -> Result<Outcome> {
    let b = Bump::new(3.8, 4.8)?;
    let n = 100_000;
    let (mut core_ok, mut outer_ok, mut range_ok) = (true, true, true);
    for i in 0..=n {
        let t = 3.0 * i as f64 / n as f64;
        let v = b.eval(t);
        range_ok &= (0.0..=1.0).contains(&v) && b.eval(-t) == v;
        if t <= 1.946 {
            core_ok &= v == 1.0;
        }
        if t >= 2.1909 {
            outer_ok &= v == 0.0;
        }
    }
    let mid = b.eval_sq(4.3);
    let pass = core_ok && outer_ok && range_ok && mid == 0.5;
    outcome(
        pass,
        format!(
            "B = 1 on core: {core_ok}, 0 outside: {outer_ok}, in [0, 1]: {range_ok}; B at t² = 4.3: {mid:?} (at fl(√4.3): {:?})",
            b.eval(4.3f64.sqrt())
        ),
    )
}

fn c5_coherence() -> Result<Outcome> {
    let n = 200;
    let (mut dev, mut section, mut pole) = (0.0f64, 0.0f64, 0.0f64);
    for name in CATALOG {
        let arc = get_knot(name)?;
        let axis = TwistAxis::from_hint(&arc)?;
        let bump = choose_bump(&arc, &axis)?;
        let s0 = spin(&arc);
        let mut surfaces = vec![twist_spin(&arc, &axis, bump, 0)?];
        dev = dev.max(max_deviation(&surfaces[0], &s0, n));
        if let Ok(s) = twist_spin(&arc, &axis, bump, 10) {
            surfaces.push(s);
        }
        for s in &surfaces {
            let (td, thd) = (s.t_domain(), s.theta_domain());
            for i in 0..n {
                let t = td.node(i, n);
                let p = s.eval(t, 0.0);
                let q = arc.eval(t);
                section = section.max((0..3).map(|k| (p[k] - q[k]).abs()).fold(p[3].abs(), f64::max));
            }
            for t in [td.lo, td.hi] {
                let p0 = s.eval(t, thd.lo);
                for j in 0..n {
                    let p = s.eval(t, thd.node(j, n));
                    pole = pole.max((0..4).map(|k| (p[k] - p0[k]).abs()).fold(0.0, f64::max));
                }
            }
        }
    }
    let pass = dev <= 1e-10 && section <= 1e-10 && pole <= 1e-9;
    outcome(pass, format!("k = 0 vs spin {dev:.1e}; θ = 0 section {section:.1e}; pole spread {pole:.1e}"))
}

fn c6_embedding() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["trefoil_spun", "figure8_spun"] {
        let s = spin(&get_knot(name)?);
        let rank = jacobian_rank_scan(&s, 400, 400, 1e-6)?;
        let opt = ScanOptions::for_surface(&s, (400, 400), 1e-6, 1e-3, 4.0, 10_000);
        let inj = injectivity_scan(&s, 400, 400, opt.param_sep, 1e-3, 10_000)?;
        pass &= rank.ok && inj.is_empty();
        parts.push(format!("{name}: min σ2/σ1 {:.2e}, {} collisions", rank.min_ratio, inj.total));
    }
    let s = spin(&get_knot("trefoil_spun")?).select([0, 2, 3])?;
    let scan = injectivity_scan(&s, 400, 400, 0.3, 0.1, 100_000)?;
    let clusters = cluster_collisions(&scan.collisions, 0.1);
    pass &= !clusters.is_empty();
    parts.push(format!("xzw projection: {} collision clusters", clusters.len()));
    outcome(pass, parts.join("; "))
}

fn c7_poly_spin() -> Result<Outcome> {
    let arc = get_knot("trefoil_spun")?;
    let exact = spin(&arc);
    let d8 = max_deviation(&polynomial_spin(&arc, 8)?.map, &exact, 200);
    let d12 = max_deviation(&polynomial_spin(&arc, 12)?.map, &exact, 200);
    let budget = max_abs_on(&arc) * 0.02;
    outcome(d8 <= budget && d12 < d8, format!("degree 8 {d8:.3e} (budget {budget:.3e}), degree 12 {d12:.3e}"))
}

fn c8_family() -> Result<Outcome> {
    let arc = get_knot("trefoil_spun")?;
    let map = polynomial_spin(&arc, 8)?.map.to_unit_square();
    let opt = ScanOptions::for_surface(&map, (400, 400), 1e-6, 1e-3, 4.0, 10_000);
    let pairs = xy_coincidences(&map, 128, 128, opt.param_sep)?;
    let (spec, _) = odd_perturbation(map.coords(), 2, &pairs)?;
    let rep = isotopy_family_check(&map, &spec, &[0.0, 0.25, 0.5, 0.75, 1.0], &opt)?;
    let members: Vec<String> = rep.members.iter().map(|m| format!("u={} {}", m.u, if m.ok() { "ok" } else { "bad" })).collect();
    outcome(
        spec.epsilon > 0.0 && rep.ok(),
        format!("{} coincidences, ε = {:.4e}; {}", pairs.len(), spec.epsilon, members.join(", ")),
    )
}

fn c9_bernstein() -> Result<Outcome> {
    let unit = Interval::symmetric(1.0);
    let deg = 7;
    let konst = bernstein_fit2(&bernstein_lattice(deg, |_, _| [2.5, -1.0, 0.0, 7.0]), deg)?;
    let c_err = (0..=20)
        .flat_map(|i| (0..=20).map(move |j| (unit.node(i, 21), unit.node(j, 21))))
        .map(|(t, s)| {
            [2.5, -1.0, 0.0, 7.0].iter().zip(&konst).map(|(v, p)| (p.eval(t, s) - v).abs()).fold(0.0, f64::max)
        })
        .fold(0.0f64, f64::max);
    let lin = |t: f64, s: f64| [1.0 + 2.0 * t - s, 0.5 * s, -t, 3.0 * t + 4.0 * s - 2.0];
    let fl = bernstein_fit2(&bernstein_lattice(deg, lin), deg)?;
    let l_err = (0..=20)
        .flat_map(|i| (0..=20).map(move |j| (unit.node(i, 21), unit.node(j, 21))))
        .map(|(t, s)| lin(t, s).iter().zip(&fl).map(|(v, p)| (p.eval(t, s) - v).abs()).fold(0.0, f64::max))
        .fold(0.0f64, f64::max);

    let s = spin(&get_knot("trefoil_spun")?);
    let (td, thd) = (s.t_domain(), s.theta_domain());
    let on_square = |t: f64, u: f64| s.eval(td.lerp(0.5 * (t + 1.0)), thd.lerp(0.5 * (u + 1.0)));
    let err = |degree: usize| -> Result<f64> {
        let f = bernstein_fit2(&bernstein_lattice(degree, on_square), degree)?;
        let map = PolyMap4::new(f, unit, unit, Topology::SPHERE);
        let n = 101;
        let mut e = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let (t, u) = (unit.node(i, n), unit.node(j, n));
                let (p, q) = (map.eval(t, u), on_square(t, u));
                e = (0..4).map(|k| (p[k] - q[k]).abs()).fold(e, f64::max);
            }
        }
        Ok(e)
    };
    let (e20, e40) = (err(20)?, err(40)?);
    outcome(
        c_err <= 1e-12 && l_err <= 1e-12 && e40 < e20,
        format!("constant {c_err:.1e}, degree-1 {l_err:.1e}; spun trefoil degree 20 {e20:.3e} → degree 40 {e40:.3e}"),
    )
}

fn c10_motion_picture() -> Result<Outcome> {
    let s = spin(&get_knot("trefoil_spun")?);
    let n = 200;
    let g = sample_surface(&s, n, n)?;
    let (lo, hi) = coordinate_range(&g, 3);
    let sets = sweep(&s, 'w', &sweep_values(lo, hi, 24), n, n)?;
    let td = s.t_domain();
    let cell = td.width() / (n - 1) as f64;
    let at_pole = |t: f64| (t - td.lo).abs() <= cell || (td.hi - t).abs() <= cell;
    let mut curves_ok = true;
    for cs in &sets {
        for c in &cs.curves {
            let ends = (c.params.first(), c.params.last());
            curves_ok &= c.closed || matches!(ends, (Some(a), Some(b)) if at_pole(a.0) && at_pole(b.0));
        }
    }
    let zero = spun4d::export::slice(&s, 'w', 0.0, n, n)?;
    let on_rows = zero.curves.iter().flat_map(|c| &c.params).all(|&(t, th)| {
        let d = [0.0, PI, 2.0 * PI].iter().map(|r| (th - r).abs()).fold(f64::INFINITY, f64::min);
        d <= 1e-9 || at_pole(t)
    });
    let mut meshes_ok = true;
    let mut chis = Vec::new();
    for name in CATALOG {
        let m = to_mesh(&project(&sample_surface(&spin(&get_knot(name)?), n, n)?, &Projection::Axes([0, 1, 2])));
        meshes_ok &= m.is_watertight() && m.euler_characteristic() == 2;
        chis.push(m.euler_characteristic());
    }
    outcome(
        curves_ok && on_rows && !zero.curves.is_empty() && meshes_ok,
        format!(
            "24 slices, closed or pole-terminated: {curves_ok}; w = 0 on θ ∈ {{0, π}}: {on_rows}; meshes watertight with χ {chis:?}"
        ),
    )
}

/// Independent count: intersections between non-adjacent segments of a
/// finely sampled polyline.
fn polyline_crossings(f: &Poly1, g: &Poly1, iv: Interval, n: usize) -> usize {
    let pts: Vec<(f64, f64)> = (0..=n).map(|i| iv.lerp(i as f64 / n as f64)).map(|t| (f.eval(t), g.eval(t))).collect();
    let cross = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let mut count = 0;
    for i in 0..n {
        let (p, q) = (pts[i], pts[i + 1]);
        for j in i + 2..n {
            let (r, s) = (pts[j], pts[j + 1]);
            if p.0.max(q.0) < r.0.min(s.0) || r.0.max(s.0) < p.0.min(q.0) || p.1.max(q.1) < r.1.min(s.1) || r.1.max(s.1) < p.1.min(q.1) {
                continue;
            }
            if cross(p, q, r) * cross(p, q, s) < 0.0 && cross(r, s, p) * cross(r, s, q) < 0.0 {
                count += 1;
            }
        }
    }
    count
}

fn c11_double_points() -> Result<Outcome> {
    let tref = get_knot("trefoil_spun")?;
    let fig8 = get_knot("figure8_spun")?;
    let wide = Interval::symmetric(4.0);
    let t_n = plane_double_points(&tref.f, &tref.g, tref.ab)?.len();
    let t_o = polyline_crossings(&tref.f, &tref.g, tref.ab, 8000);
    let f_n = plane_double_points(&fig8.f, &fig8.g, fig8.ab)?.len();
    let f_o = polyline_crossings(&fig8.f, &fig8.g, fig8.ab, 8000);
    let f_w = plane_double_points(&fig8.f, &fig8.g, wide)?.len();
    let f_wo = polyline_crossings(&fig8.f, &fig8.g, wide, 8000);
    outcome(
        t_n == 3 && f_n == 4 && t_n == t_o && f_n == f_o,
        format!(
            "trefoil {t_n} (oracle {t_o}, expected 3); figure-eight on its arc {f_n} (oracle {f_o}, expected 4), on [-4, 4] {f_w} (oracle {f_wo})"
        ),
    )
}

#[test]
fn acceptance() {
    let results = [
        run(1, "fixture roots", 1, c1_roots),
        run(2, "Chebyshev regression", 1, c2_chebyshev),
        run(3, "rotation algebra", 1, c3_rotations),
        run(4, "bump contract", 1, c4_bump),
        run(5, "construction coherence", 5, c5_coherence),
        run(6, "embedding certification", 60, c6_embedding),
        run(7, "polynomialization error", 10, c7_poly_spin),
        run(8, "odd perturbation family", 60, c8_family),
        run(9, "Bernstein sanity", 30, c9_bernstein),
        run(10, "motion picture", 30, c10_motion_picture),
        run(11, "double points", 10, c11_double_points),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &p)| !p).map(|(i, _)| i + 1).collect();
    println!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

