//! Sampling, projection to R^3, hyperplane slices, meshing and file output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::Parametrization;

/// Samples on a uniform `(t, θ)` grid including both ends of each range,
/// stored row-major with `t` outer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid<const D: usize> {
    pub ts: Vec<f64>,
    pub thetas: Vec<f64>,
    #[serde(with = "points_serde")]
    pub points: Vec<[f64; D]>,
    /// The last column repeats the first (periodic θ).
    pub seam: bool,
    /// The first and last rows are single points.
    pub poles: bool,
}

pub type Grid4 = SampleGrid<4>;
pub type Grid3 = SampleGrid<3>;

mod points_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(p: &[[f64; D]], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Vec<f64>> = p.iter().map(|x| x.to_vec()).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(d: De) -> Result<Vec<[f64; D]>, De::Error> {
        let v: Vec<Vec<f64>> = Vec::deserialize(d)?;
        v.into_iter()
            .map(|x| {
                let n = x.len();
                x.try_into()
                    .map_err(|_| serde::de::Error::custom(format!("point has {n} coordinates, expected {D}")))
            })
            .collect()
    }
}

impl<const D: usize> SampleGrid<D> {
    pub fn n_t(&self) -> usize {
        self.ts.len()
    }

    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    pub fn at(&self, i: usize, j: usize) -> [f64; D] {
        self.points[i * self.thetas.len() + j]
    }

    pub fn row(&self, i: usize) -> &[[f64; D]] {
        let n = self.thetas.len();
        &self.points[i * n..(i + 1) * n]
    }
}

pub fn sample_surface<P: Parametrization>(s: &P, n_t: usize, n_th: usize) -> Result<Grid4> {
    if n_t < 2 || n_th < 2 {
        return Err(Error::InvalidParameter(format!("sample grid {n_t}×{n_th} needs at least 2×2")));
    }
    let (td, thd) = (s.t_domain(), s.theta_domain());
    let ts: Vec<f64> = (0..n_t).map(|i| td.node(i, n_t)).collect();
    let thetas: Vec<f64> = (0..n_th).map(|j| thd.node(j, n_th)).collect();
    let points = ts
        .par_iter()
        .flat_map_iter(|&t| thetas.iter().map(move |&th| s.eval(t, th)))
        .collect();
    let topo = s.topology();
    Ok(SampleGrid { ts, thetas, points, seam: topo.periodic_theta, poles: topo.poles })
}

/// A linear map R^4 -> R^3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Keep three coordinates, e.g. `"xzw"`.
    Axes([usize; 3]),
    Matrix([[f64; 4]; 3]),
}

const AXIS_NAMES: [char; 4] = ['x', 'y', 'z', 'w'];

pub fn axis_index(c: char) -> Result<usize> {
    AXIS_NAMES
        .iter()
        .position(|&a| a == c.to_ascii_lowercase())
        .ok_or_else(|| Error::BadAxes(format!("unknown axis `{c}`")))
}

impl FromStr for Projection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 3 {
            return Err(Error::BadAxes(format!("`{s}` must name three axes")));
        }
        let axes = [axis_index(chars[0])?, axis_index(chars[1])?, axis_index(chars[2])?];
        Projection::axes(axes)
    }
}

impl Projection {
    pub fn axes(axes: [usize; 3]) -> Result<Self> {
        if axes.iter().any(|&a| a > 3) || axes[0] == axes[1] || axes[1] == axes[2] || axes[0] == axes[2] {
            return Err(Error::BadAxes(format!("axes {axes:?} must be three distinct indices below 4")));
        }
        Ok(Projection::Axes(axes))
    }

    /// General projection; the rows must be linearly independent.
    pub fn matrix(rows: [[f64; 4]; 3]) -> Result<Self> {
        let m = nalgebra::Matrix3x4::from_fn(|i, j| rows[i][j]);
        let sv = m.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if !(lo > 1e-12 * hi) {
            return Err(Error::BadAxes("projection rows are linearly dependent".into()));
        }
        Ok(Projection::Matrix(rows))
    }

    pub fn apply(&self, p: &[f64; 4]) -> [f64; 3] {
        match self {
            Projection::Axes(a) => [p[a[0]], p[a[1]], p[a[2]]],
            Projection::Matrix(m) => m.map(|r| r.iter().zip(p).map(|(a, b)| a * b).sum()),
        }
    }
}

pub fn project(g: &Grid4, proj: &Projection) -> Grid3 {
    SampleGrid {
        ts: g.ts.clone(),
        thetas: g.thetas.clone(),
        points: g.points.iter().map(|p| proj.apply(p)).collect(),
        seam: g.seam,
        poles: g.poles,
    }
}

/// Triangle mesh with the metadata of the grid it came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub seam_welded: bool,
    pub poles_collapsed: bool,
    /// Faces with (numerically) zero area.
    pub degenerate_faces: usize,
}

impl SurfaceMesh {
    fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    pub fn edge_count(&self) -> usize {
        self.edge_counts().len()
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.faces.len() as i64
    }

    /// Every edge belongs to exactly two faces.
    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.edge_counts().values().all(|&c| c == 2)
    }
}

/// Triangulate a grid, welding the seam and collapsing pole rows as the
/// grid's flags say.
pub fn to_mesh(g: &Grid3) -> SurfaceMesh {
    to_mesh_with(g, g.seam, g.poles)
}

pub fn to_mesh_with(g: &Grid3, weld_seam: bool, collapse_poles: bool) -> SurfaceMesh {
    let (nt, nth) = (g.n_t(), g.n_theta());
    let cols = if weld_seam { nth - 1 } else { nth };
    let mut vertices = Vec::new();
    let mut index = vec![vec![0usize; cols]; nt];
    for (i, row) in index.iter_mut().enumerate() {
        if collapse_poles && (i == 0 || i + 1 == nt) {
            let r = g.row(i);
            let n = r.len() as f64;
            let c = r.iter().fold([0.0; 3], |a, p| [a[0] + p[0], a[1] + p[1], a[2] + p[2]]);
            vertices.push(c.map(|x| x / n));
            row.fill(vertices.len() - 1);
        } else {
            for (j, slot) in row.iter_mut().enumerate() {
                vertices.push(g.at(i, j));
                *slot = vertices.len() - 1;
            }
        }
    }
    let span = vertices.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut faces = Vec::new();
    let mut degenerate = 0;
    for i in 0..nt - 1 {
        for j in 0..nth - 1 {
            let jn = if weld_seam { (j + 1) % cols } else { j + 1 };
            let (a, b, c, d) = (index[i][j], index[i + 1][j], index[i + 1][jn], index[i][jn]);
            for f in [[a, b, c], [a, c, d]] {
                if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                    continue;
                }
                if triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]) <= 1e-14 * span * span {
                    degenerate += 1;
                }
                faces.push(f);
            }
        }
    }
    SurfaceMesh { vertices, faces, seam_welded: weld_seam, poles_collapsed: collapse_poles, degenerate_faces: degenerate }
}

fn triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let x = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// A chain of slice points with the parameters they came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<[f64; 3]>,
    pub params: Vec<(f64, f64)>,
    /// The last point connects back to the first.
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        let d = |a: &[f64; 3], b: &[f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        let open: f64 = self.points.windows(2).map(|w| d(&w[0], &w[1])).sum();
        match (self.closed, self.points.first(), self.points.last()) {
            (true, Some(a), Some(b)) => open + d(a, b),
            _ => open,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceCurveSet {
    pub slice_value: f64,
    /// `'x'`, `'y'`, `'z'` or `'w'`.
    pub axis: char,
    pub curves: Vec<Polyline>,
}

impl SliceCurveSet {
    pub fn total_length(&self) -> f64 {
        self.curves.iter().map(Polyline::length).sum()
    }
}

/// Where a contour crosses the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    /// Edge from `(i, j)` to `(i, j + 1)`.
    AlongTheta(usize, usize),
    /// Edge from `(i, j)` to `(i + 1, j)`.
    AlongT(usize, usize),
    PoleLo,
    PoleHi,
}

/// Intersect the surface with the hyperplane `axis = value`.
///
/// Marching squares on `coordinate - value` over the parameter grid. Saddle
/// cells are resolved by the true field at the cell centre; crossings are
/// linearly interpolated along edges and mapped through the surface.
pub fn slice<P: Parametrization>(s: &P, axis: char, value: f64, n_t: usize, n_th: usize) -> Result<SliceCurveSet> {
    if n_t < 64 || n_th < 64 {
        return Err(Error::InvalidParameter(format!("slice grid {n_t}×{n_th} is below 64×64")));
    }
    let ax = axis_index(axis)?;
    let keep: Vec<usize> = (0..4).filter(|&k| k != ax).collect();
    let topo = s.topology();
    let (td, thd) = (s.t_domain(), s.theta_domain());
    let periodic = topo.periodic_theta;
    let ts: Vec<f64> = (0..n_t).map(|i| td.node(i, n_t)).collect();
    let cols = n_th;
    let theta_at = |j: usize| {
        if periodic {
            thd.lo + thd.width() * j as f64 / cols as f64
        } else {
            thd.node(j, cols)
        }
    };
    let thetas: Vec<f64> = (0..cols).map(theta_at).collect();
    let field = |t: f64, th: f64| s.eval(t, th)[ax] - value;
    let mut vals: Vec<Vec<f64>> = ts.par_iter().map(|&t| thetas.iter().map(|&th| field(t, th)).collect()).collect();
    let scale = vals.iter().flatten().fold(value.abs(), |m, v| m.max((v + value).abs())).max(1.0);
    if topo.poles {
        // A pole row is one point: use a single value, snapped to zero when
        // the hyperplane passes through it.
        for i in [0, n_t - 1] {
            let v = vals[i][0];
            let v = if v.abs() <= 1e-12 * scale { 0.0 } else { v };
            vals[i].fill(v);
        }
    }
    let inside = |v: f64| v >= 0.0;
    let cells_j = if periodic { cols } else { cols - 1 };
    let next_j = |j: usize| (j + 1) % cols;
    // Parameter of a crossing on an edge.
    let crossing = |node: Node| -> (f64, f64) {
        match node {
            Node::AlongTheta(i, j) => {
                let (a, b) = (vals[i][j], vals[i][next_j(j)]);
                let w = a / (a - b);
                let th1 = if next_j(j) == 0 { thd.hi } else { thetas[j + 1] };
                (ts[i], thetas[j] + w * (th1 - thetas[j]))
            }
            Node::AlongT(i, j) => {
                let (a, b) = (vals[i][j], vals[i + 1][j]);
                let w = a / (a - b);
                (ts[i] + w * (ts[i + 1] - ts[i]), thetas[j])
            }
            Node::PoleLo => (td.lo, thetas[0]),
            Node::PoleHi => (td.hi, thetas[0]),
        }
    };
    // Crossings sitting on a pole row collapse to the pole.
    let classify = |node: Node| -> Node {
        if !topo.poles {
            return node;
        }
        let p = crossing(node);
        match node {
            Node::AlongT(i, _) if i == 0 && p.0 == td.lo => Node::PoleLo,
            Node::AlongT(i, _) if i + 2 == n_t && p.0 == td.hi => Node::PoleHi,
            _ => node,
        }
    };
    let segments: Vec<(Node, Node)> = (0..n_t - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = Vec::new();
            for j in 0..cells_j {
                let jn = next_j(j);
                // Corners counter-clockwise from (i, j); edges between them.
                let c = [vals[i][j], vals[i + 1][j], vals[i + 1][jn], vals[i][jn]];
                let e = [Node::AlongT(i, j), Node::AlongTheta(i + 1, j), Node::AlongT(i, jn), Node::AlongTheta(i, j)];
                let code = c.iter().enumerate().fold(0, |m, (k, &v)| m | ((inside(v) as u8) << k));
                let pairs: &[(usize, usize)] = match code {
                    0 | 15 => &[],
                    1 | 14 => &[(3, 0)],
                    2 | 13 => &[(0, 1)],
                    4 | 11 => &[(1, 2)],
                    8 | 7 => &[(2, 3)],
                    3 | 12 => &[(3, 1)],
                    6 | 9 => &[(0, 2)],
                    5 | 10 => {
                        let th1 = if jn == 0 { thd.hi } else { thetas[jn] };
                        let centre = field(0.5 * (ts[i] + ts[i + 1]), 0.5 * (thetas[j] + th1));
                        // Corners 0 and 2 are connected through the centre
                        // when the centre agrees with them.
                        let joined_02 = inside(centre) == inside(c[0]);
                        if joined_02 {
                            &[(0, 1), (2, 3)]
                        } else {
                            &[(3, 0), (1, 2)]
                        }
                    }
                    _ => unreachable!(),
                };
                for &(a, b) in pairs {
                    let (na, nb) = (classify(e[a]), classify(e[b]));
                    if na != nb {
                        out.push((na, nb));
                    }
                }
            }
            out
        })
        .collect();
    let chains = chain_segments(&segments);
    let curves = chains
        .into_iter()
        .map(|(nodes, closed)| {
            let params: Vec<(f64, f64)> = nodes.iter().map(|&n| crossing(n)).collect();
            let points = params
                .iter()
                .map(|&(t, th)| {
                    let p = s.eval(t, th);
                    [p[keep[0]], p[keep[1]], p[keep[2]]]
                })
                .collect();
            Polyline { points, params, closed }
        })
        .collect();
    Ok(SliceCurveSet { slice_value: value, axis: AXIS_NAMES[ax], curves })
}

/// Join segments sharing endpoints into maximal chains. Open chains are
/// started from odd-degree nodes so they run end to end.
fn chain_segments(segs: &[(Node, Node)]) -> Vec<(Vec<Node>, bool)> {
    let mut adj: HashMap<Node, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segs.iter().enumerate() {
        adj.entry(a).or_default().push(k);
        adj.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let walk = |start_seg: usize, start: Node, used: &mut Vec<bool>| {
        let mut nodes = vec![start];
        let mut cur = start;
        let mut seg = Some(start_seg);
        while let Some(k) = seg {
            used[k] = true;
            let (a, b) = segs[k];
            cur = if a == cur { b } else { a };
            nodes.push(cur);
            seg = adj[&cur].iter().copied().find(|&m| !used[m]);
        }
        let closed = nodes.len() > 2 && nodes.first() == nodes.last();
        if closed {
            nodes.pop();
        }
        (nodes, closed)
    };
    for (k, &(a, b)) in segs.iter().enumerate() {
        if used[k] {
            continue;
        }
        for n in [a, b] {
            if adj[&n].len() % 2 == 1 {
                if let Some(m) = adj[&n].iter().copied().find(|&m| !used[m]) {
                    out.push(walk(m, n, &mut used));
                }
            }
        }
    }
    for k in 0..segs.len() {
        if !used[k] {
            out.push(walk(k, segs[k].0, &mut used));
        }
    }
    out
}

/// Slices at each value, in order.
pub fn sweep<P: Parametrization>(s: &P, axis: char, values: &[f64], n_t: usize, n_th: usize) -> Result<Vec<SliceCurveSet>> {
    values.par_iter().map(|&v| slice(s, axis, v, n_t, n_th)).collect()
}

/// `count` values evenly spaced strictly inside `[lo, hi]`.
pub fn sweep_values(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| lo + (hi - lo) * k as f64 / (count + 1) as f64).collect()
}

/// Range of coordinate `axis` over a sample grid.
pub fn coordinate_range(g: &Grid4, axis: usize) -> (f64, f64) {
    g.points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[axis]), hi.max(p[axis])))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Obj,
    Ply,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(Format::Obj),
            "ply" => Ok(Format::Ply),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}`"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Obj => "obj",
            Format::Ply => "ply",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Shortest decimal form of `x` rounded to 9 significant digits.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:?}", if x == 0.0 { 0.0 } else { x });
    }
    let r: f64 = format!("{x:.8e}").parse().expect("float round trip");
    format!("{r:?}")
}

fn round9(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            let r: f64 = fmt9(n.as_f64().unwrap_or(0.0)).parse().unwrap_or(0.0);
            if let Some(m) = serde_json::Number::from_f64(r) {
                *n = m;
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round9),
        serde_json::Value::Object(o) => o.values_mut().for_each(round9),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 9 significant digits.
pub fn to_json9<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round9(&mut v);
    Ok(serde_json::to_string_pretty(&v)?)
}

pub fn write_obj(m: &SurfaceMesh, out: &mut impl Write) -> Result<()> {
    for v in &m.vertices {
        writeln!(out, "v {} {} {}", fmt9(v[0]), fmt9(v[1]), fmt9(v[2]))?;
    }
    for f in &m.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn write_ply(m: &SurfaceMesh, out: &mut impl Write) -> Result<()> {
    writeln!(out, "ply\nformat ascii 1.0")?;
    writeln!(out, "element vertex {}", m.vertices.len())?;
    writeln!(out, "property double x\nproperty double y\nproperty double z")?;
    writeln!(out, "element face {}", m.faces.len())?;
    writeln!(out, "property list uchar int vertex_indices\nend_header")?;
    for v in &m.vertices {
        writeln!(out, "{} {} {}", fmt9(v[0]), fmt9(v[1]), fmt9(v[2]))?;
    }
    for f in &m.faces {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

/// One row per sample: `t,theta,x,y,z` or `t,theta,x,y,z,w`.
pub fn write_grid_csv<const D: usize>(g: &SampleGrid<D>, out: &mut impl Write) -> Result<()> {
    let names = ["x", "y", "z", "w"];
    writeln!(out, "t,theta,{}", names[..D].join(","))?;
    let mut line = String::new();
    for (i, &t) in g.ts.iter().enumerate() {
        for (j, &th) in g.thetas.iter().enumerate() {
            line.clear();
            let _ = write!(line, "{},{}", fmt9(t), fmt9(th));
            for x in g.at(i, j) {
                let _ = write!(line, ",{}", fmt9(x));
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

/// Slice points as `curve,t,theta,x,y,z` (the three coordinates left after
/// dropping the slicing axis, in order).
pub fn write_slice_csv(s: &SliceCurveSet, out: &mut impl Write) -> Result<()> {
    writeln!(out, "curve,t,theta,x,y,z")?;
    for (k, c) in s.curves.iter().enumerate() {
        for (p, q) in c.points.iter().zip(&c.params) {
            writeln!(out, "{k},{},{},{},{},{}", fmt9(q.0), fmt9(q.1), fmt9(p[0]), fmt9(p[1]), fmt9(p[2]))?;
        }
    }
    Ok(())
}

/// Slice curves as OBJ polylines (`l` records); closed curves repeat their
/// first index.
pub fn write_slice_obj(s: &SliceCurveSet, out: &mut impl Write) -> Result<()> {
    let mut base = 1;
    for c in &s.curves {
        for p in &c.points {
            writeln!(out, "v {} {} {}", fmt9(p[0]), fmt9(p[1]), fmt9(p[2]))?;
        }
        let mut idx: Vec<String> = (base..base + c.points.len()).map(|i| i.to_string()).collect();
        if c.closed && !idx.is_empty() {
            idx.push(base.to_string());
        }
        if idx.len() >= 2 {
            writeln!(out, "l {}", idx.join(" "))?;
        }
        base += c.points.len();
    }
    Ok(())
}

/// Rows of a CSV written by [`write_grid_csv`] or [`write_slice_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let bad = |e: csv::Error| Error::InvalidParameter(format!("{}: {e}", path.display()));
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(bad)?;
    let header: Vec<String> = rd.headers().map_err(bad)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(bad)?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::InvalidParameter(format!("line {line}: `{f}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn export_mesh(m: &SurfaceMesh, format: Format, path: &Path) -> Result<()> {
    write_file(path, |w| match format {
        Format::Obj => write_obj(m, w),
        Format::Ply => write_ply(m, w),
        Format::Json => Ok(w.write_all(to_json9(m)?.as_bytes())?),
        Format::Csv => Err(Error::InvalidParameter("meshes export as obj, ply or json".into())),
    })
}

pub fn export_grid<const D: usize>(g: &SampleGrid<D>, format: Format, path: &Path) -> Result<()> {
    write_file(path, |w| match format {
        Format::Csv => write_grid_csv(g, w),
        Format::Json => Ok(w.write_all(to_json9(g)?.as_bytes())?),
        _ => Err(Error::InvalidParameter("sample grids export as csv or json".into())),
    })
}

pub fn export_slices(s: &SliceCurveSet, format: Format, path: &Path) -> Result<()> {
    write_file(path, |w| match format {
        Format::Csv => write_slice_csv(s, w),
        Format::Obj => write_slice_obj(s, w),
        Format::Json => Ok(w.write_all(to_json9(s)?.as_bytes())?),
        Format::Ply => Err(Error::InvalidParameter("slices export as csv, obj or json".into())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{get_knot, CATALOG};
    use crate::spin::spin;
    use crate::twist::{choose_bump, twist_spin, TwistAxis};
    use std::f64::consts::{PI, TAU};

    fn unknot() -> crate::surface::Surface4 {
        spin(&get_knot("unknot").unwrap())
    }

    #[test]
    fn two_by_two_sample() {
        let g = sample_surface(&unknot(), 2, 2).unwrap();
        assert_eq!(g.points.len(), 4);
        assert_eq!(g.ts, vec![-1.0, 1.0]);
        assert_eq!(g.thetas, vec![0.0, TAU]);
        assert!(g.seam && g.poles);
        for p in &g.points {
            assert!(p[2].abs() < 1e-12 && p[3].abs() < 1e-12);
        }
    }

    #[test]
    fn poles_and_seam_of_spun_trefoil() {
        let arc = get_knot("trefoil_spun").unwrap();
        let g = sample_surface(&spin(&arc), 50, 40).unwrap();
        let a = arc.ab.lo;
        for p in g.row(0) {
            assert!((p[0] - arc.f.eval(a)).abs() < 1e-12 && (p[1] - arc.g.eval(a)).abs() < 1e-12);
            assert!(p[2].abs() < 1e-9 && p[3].abs() < 1e-9);
        }
        for i in 0..50 {
            let (p, q) = (g.at(i, 0), g.at(i, 39));
            assert!(p.iter().zip(&q).all(|(x, y)| (x - y).abs() < 1e-9));
        }
    }

    #[test]
    fn projections() {
        let p = [1.0, 2.0, 3.0, 4.0];
        assert_eq!("xyz".parse::<Projection>().unwrap().apply(&p), [1.0, 2.0, 3.0]);
        assert_eq!("xzw".parse::<Projection>().unwrap().apply(&p), [1.0, 3.0, 4.0]);
        let m = Projection::matrix([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(m.apply(&p), [1.0, 2.0, 3.0]);
        for bad in ["xy", "xxz", "xqz", "xyzw"] {
            assert!(matches!(bad.parse::<Projection>(), Err(Error::BadAxes(_))), "{bad}");
        }
        assert!(Projection::matrix([[1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]).is_err());
    }

    #[test]
    fn xzw_projection_is_the_rotated_profile() {
        // Each point is (x(t), h(t) cos θ, h(t) sin θ).
        let arc = get_knot("trefoil_spun").unwrap();
        let g = project(&sample_surface(&spin(&arc), 30, 30).unwrap(), &"xzw".parse().unwrap());
        for (i, &t) in g.ts.iter().enumerate() {
            for (j, &th) in g.thetas.iter().enumerate() {
                let p = g.at(i, j);
                let h = arc.h.eval(t);
                let want = [arc.f.eval(t), h * th.cos(), h * th.sin()];
                assert!(p.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn sphere_meshes_close_up() {
        let g = project(&sample_surface(&unknot(), 64, 64).unwrap(), &"xyz".parse().unwrap());
        let m = to_mesh(&g);
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.is_watertight());
        assert!(m.faces.iter().flatten().all(|&i| i < m.vertices.len()));
        let open = to_mesh_with(&g, false, false);
        assert_eq!(open.euler_characteristic(), 1);
        assert!(!open.is_watertight());
    }

    #[test]
    fn catalog_meshes_close_up() {
        for name in CATALOG {
            let arc = get_knot(name).unwrap();
            let m = to_mesh(&project(&sample_surface(&spin(&arc), 200, 200).unwrap(), &"xyz".parse().unwrap()));
            assert_eq!(m.euler_characteristic(), 2, "{name}");
            assert!(m.is_watertight(), "{name}");
            let axis = TwistAxis::from_hint(&arc).unwrap();
            let bump = choose_bump(&arc, &axis).unwrap();
            // A low arc may swing through the boundary plane when twisted.
            let tw = match twist_spin(&arc, &axis, bump, 2) {
                Err(Error::PlaneCrossing { .. }) if name != "trefoil_twist" => continue,
                r => r.unwrap(),
            };
            let m = to_mesh(&project(&sample_surface(&tw, 120, 120).unwrap(), &"xzw".parse().unwrap()));
            assert!(m.is_watertight() && m.euler_characteristic() == 2, "{name} twisted");
        }
    }

    fn on_rows(c: &Polyline, rows: &[f64], tol: f64) -> bool {
        c.params.iter().all(|&(_, th)| {
            rows.iter().any(|&r| {
                let d = (th - r).rem_euclid(TAU);
                d.min(TAU - d) < tol
            })
        })
    }

    #[test]
    fn w_zero_slice_of_spun_trefoil() {
        let arc = get_knot("trefoil_spun").unwrap();
        let s = spin(&arc);
        let cs = slice(&s, 'w', 0.0, 128, 128).unwrap();
        assert_eq!(cs.curves.len(), 1);
        let c = &cs.curves[0];
        assert!(c.closed);
        // Interior points sit on θ ∈ {0, π}; the poles are single points.
        let interior = Polyline {
            params: c.params.iter().copied().filter(|p| p.0 > arc.ab.lo && p.0 < arc.ab.hi).collect(),
            ..Default::default()
        };
        assert!(on_rows(&interior, &[0.0, PI], 1e-9));
        // The reported (x, y, z) is the arc or its mirror in z.
        for (p, q) in c.points.iter().zip(&c.params) {
            let a = arc.eval(q.0);
            assert!((p[0] - a[0]).abs() < 1e-12 && (p[1] - a[1]).abs() < 1e-12);
            assert!((p[2].abs() - a[2]).abs() < 1e-9);
        }
    }

    #[test]
    fn unknot_equator() {
        let cs = slice(&unknot(), 'z', 0.0, 64, 64).unwrap();
        assert_eq!(cs.curves.len(), 1);
        assert!(cs.curves[0].closed);
        for p in &cs.curves[0].points {
            // Remaining coordinates (x, y, w) = (t, 0, ±(1 - t^2)).
            assert!(p[1] == 0.0 && (p[2].abs() - (1.0 - p[0] * p[0])).abs() < 1e-9);
        }
        assert!(cs.curves[0].points.iter().any(|p| p[2] > 0.5) && cs.curves[0].points.iter().any(|p| p[2] < -0.5));
    }

    #[test]
    fn slice_above_the_surface_is_empty() {
        let s = spin(&get_knot("trefoil_spun").unwrap());
        assert!(slice(&s, 'w', 7.5, 64, 64).unwrap().curves.is_empty());
        assert!(slice(&s, 'w', 0.0, 32, 64).is_err());
        assert!(slice(&s, 'q', 0.0, 64, 64).is_err());
    }

    #[test]
    fn sweep_curves_are_closed_or_end_on_the_boundary() {
        let s = spin(&get_knot("trefoil_spun").unwrap());
        let vals = sweep_values(-7.0, 7.0, 24);
        for cs in sweep(&s, 'w', &vals, 96, 96).unwrap() {
            assert!(cs.curves.iter().all(|c| c.closed), "w = {}", cs.slice_value);
        }
    }

    #[test]
    fn slice_points_lie_near_the_hyperplane() {
        let s = spin(&get_knot("trefoil_spun").unwrap());
        for v in [-3.0, 0.5, 4.0] {
            let cs = slice(&s, 'w', v, 128, 128).unwrap();
            assert!(!cs.curves.is_empty());
            for c in &cs.curves {
                for (p, &(t, th)) in c.points.iter().zip(&c.params) {
                    let q = s.eval(t, th);
                    assert_eq!(*p, [q[0], q[1], q[2]]);
                    assert!((q[3] - v).abs() < 0.05, "w = {} at slice {v}", q[3]);
                }
            }
        }
    }

    #[test]
    fn slice_length_varies_continuously() {
        let s = unknot();
        let lens: Vec<f64> =
            sweep(&s, 'w', &sweep_values(-0.9, 0.9, 50), 96, 96).unwrap().iter().map(|c| c.total_length()).collect();
        for w in lens.windows(2) {
            assert!(w[0] > 0.0 && w[1] > 0.0);
            assert!(w[0].max(w[1]) / w[0].min(w[1]) < 10.0);
        }
    }

    #[test]
    fn saddle_cells_follow_the_centre() {
        // x = t θ on [-1, 1]^2 has a saddle at the origin; slicing slightly
        // off zero must give two open curves that do not cross.
        let unit = crate::Interval::symmetric(1.0);
        let e = crate::surface::Expr::product(vec![
            crate::surface::Expr::poly_t(crate::Poly1::identity()),
            crate::surface::Expr::PolyTheta { poly: crate::Poly1::identity() },
        ]);
        let s = crate::surface::Surface4 {
            coords: [e, crate::surface::Expr::zero(), crate::surface::Expr::zero(), crate::surface::Expr::zero()],
            t_domain: unit,
            theta_domain: unit,
            topology: crate::surface::Topology::OPEN,
        };
        for v in [1e-3, -1e-3] {
            let cs = slice(&s, 'x', v, 65, 65).unwrap();
            assert_eq!(cs.curves.len(), 2);
            for c in &cs.curves {
                assert!(!c.closed);
                assert!(c.params.iter().all(|&(t, th)| (t * th - v).abs() < 1e-3));
                assert!(c.params.iter().all(|&(t, th)| (t * th).signum() == v.signum() || (t * th).abs() < 1e-3));
            }
        }
    }

    #[test]
    fn obj_for_one_triangle() {
        let m = SurfaceMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            faces: vec![[0, 1, 2]],
            ..Default::default()
        };
        let mut buf = Vec::new();
        write_obj(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).collect::<Vec<_>>(), vec!["f 1 2 3"]);
        let mut buf = Vec::new();
        write_ply(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("ply\nformat ascii 1.0\n"));
        assert!(text.contains("element face 1"));
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(0.0), "0.0");
        assert_eq!(fmt9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt9(-123456.789123), "-123456.789");
        assert_eq!(fmt9(2.5e-12), "2.5e-12");
    }

    #[test]
    fn csv_round_trip() {
        let g = sample_surface(&spin(&get_knot("trefoil_spun").unwrap()), 40, 30).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        export_grid(&g, Format::Csv, &path).unwrap();
        let (header, rows) = read_csv(&path).unwrap();
        assert_eq!(header, ["t", "theta", "x", "y", "z", "w"]);
        assert_eq!(rows.len(), 40 * 30);
        for (k, r) in rows.iter().enumerate() {
            let (i, j) = (k / 30, k % 30);
            let want = [&[g.ts[i], g.thetas[j]][..], &g.at(i, j)[..]].concat();
            for (a, b) in r.iter().zip(want) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn empty_slice_exports() {
        let cs = SliceCurveSet { slice_value: 9.0, axis: 'w', curves: vec![] };
        let dir = tempfile::tempdir().unwrap();
        for f in [Format::Json, Format::Csv, Format::Obj] {
            let p = dir.path().join(format!("s.{}", f.extension()));
            export_slices(&cs, f, &p).unwrap();
            assert!(p.exists());
        }
        let back: SliceCurveSet =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
        assert_eq!(back, cs);
    }
}
