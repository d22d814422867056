mod doc;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use spun4d::approx::{bernstein_lattice, bernstein_fit2, odd_perturbation};
use spun4d::catalog::{get_knot, load_knot, KnotArc, CATALOG};
use spun4d::config::Config;
use spun4d::export::{
    coordinate_range, export_grid, export_mesh, export_slices, project, sample_surface, slice, sweep, sweep_values,
    to_json9, to_mesh, Format, Projection,
};
use spun4d::spin::{polynomial_spin, spin};
use spun4d::surface::{Parametrization, PolyMap4};
use spun4d::twist::{choose_bump, polynomialize_twist, twist_spin, Bump, BumpMode, TwistAxis};
use spun4d::verify::{boundary_report, isotopy_family_check, verify_surface, xy_coincidences, ScanOptions};
use spun4d::{Error, Interval, Result};

use doc::{Shape, SurfaceDoc};
use manifest::Recorder;

#[derive(Parser, Debug)]
#[command(name = "spun4d", version, about = "Spun and twist-spun 2-knots from polynomial arcs")]
struct Cli {
    /// Configuration file [default: ./spun4d.json if present]
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run the argument lists in a JSON file `{"steps": [["spin", ...], ...]}`
    #[arg(long)]
    pipeline: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
struct Outputs {
    /// Save the surface document (JSON) for later commands
    #[arg(long)]
    save: Option<PathBuf>,
    /// Run the embedding checks; exit 2 if they fail
    #[arg(long)]
    verify: bool,
    /// Where to write the verification report
    #[arg(long)]
    report: Option<PathBuf>,
    /// Export a mesh (obj, ply, json) or sample grid (csv)
    #[arg(long)]
    export: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Coordinates kept for mesh export
    #[arg(long, default_value = "xyz")]
    plane: String,
    /// Write a motion picture: slices along this axis
    #[arg(long)]
    sweep: Option<String>,
    /// Number of slices in the sweep
    #[arg(long, default_value_t = 24)]
    count: usize,
    /// Directory for sweep files
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Format of sweep files
    #[arg(long, default_value = "json")]
    slice_format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the built-in knots
    Catalog {
        #[arg(long)]
        json: bool,
    },
    /// Spin a knot arc about the boundary plane
    Spin {
        /// Catalog name or path to a JSON knot definition
        knot: String,
        /// Replace cos/sin by Chebyshev interpolants
        #[arg(long)]
        poly: bool,
        #[arg(long)]
        cheb_degree: Option<usize>,
        #[command(flatten)]
        o: Outputs,
    },
    /// Twist-spin a knot arc k times about the chord between t1 and t2
    Twistspin {
        knot: String,
        #[arg(long)]
        k: u32,
        #[arg(long, requires = "t2")]
        t1: Option<f64>,
        #[arg(long, requires = "t1")]
        t2: Option<f64>,
        #[arg(long, requires = "d2")]
        d1: Option<f64>,
        #[arg(long, requires = "d1")]
        d2: Option<f64>,
        #[command(flatten)]
        o: Outputs,
    },
    /// Replace trigonometric (and optionally bump) factors by polynomials
    Polynomialize {
        input: PathBuf,
        #[arg(long)]
        cheb_degree: Option<usize>,
        #[arg(long)]
        bump_degree: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Polynomial approximations of a surface
    Approx {
        #[command(subcommand)]
        which: ApproxCommand,
    },
    /// Check rank, injectivity and (for arcs) the boundary condition
    Verify {
        input: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        image_tol: Option<f64>,
        #[arg(long)]
        rank_tol: Option<f64>,
        /// Also check the odd-degree perturbation family (polynomial maps)
        #[arg(long)]
        family: bool,
        #[arg(long)]
        half_degree: Option<u32>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Project to R^3 and write a mesh or sample grid
    Project {
        input: PathBuf,
        /// Three axes, e.g. xzw
        #[arg(long, default_value = "xzw")]
        plane: String,
        /// 3×4 matrix, rows separated by `;`, entries by `,`
        #[arg(long)]
        matrix: Option<String>,
        #[arg(long, default_value = "obj")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Intersect with hyperplanes axis = value
    Slice {
        input: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "json")]
        format: Format,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Evenly spaced slices across the surface's range along an axis
    Sweep {
        input: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long, default_value_t = 24)]
        count: usize,
        #[arg(long, default_value = "json")]
        format: Format,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Write a surface as mesh (obj, ply, json) or sample grid (csv)
    Export {
        input: PathBuf,
        #[arg(long)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "xyz")]
        plane: String,
        #[arg(long)]
        grid: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum ApproxCommand {
    /// Bivariate Bernstein fit on [-1, 1]^2
    Bernstein {
        input: PathBuf,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Outcome {
    Done,
    VerificationFailed,
}

#[derive(Deserialize)]
struct Pipeline {
    steps: Vec<Vec<String>>,
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("SPUN4D_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: SPUN4D_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(1);
            }
        }
    }
    let argv: Vec<String> = std::env::args().collect();
    ExitCode::from(run(&argv))
}

fn run(argv: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match &cli.config {
        Some(p) => Config::load(p),
        None => Config::discover(Path::new(".")),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e}");
            return 1;
        }
    };
    let result = if let Some(p) = &cli.pipeline {
        if cli.command.is_some() {
            eprintln!("error: --pipeline cannot be combined with a command");
            return 1;
        }
        return run_pipeline(p, &cli.config);
    } else if let Some(cmd) = cli.command {
        dispatch(cmd, argv, &config)
    } else {
        eprintln!("error: no command given; see `spun4d --help`");
        return 1;
    };
    match result {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::VerificationFailed) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run_pipeline(path: &Path, config: &Option<PathBuf>) -> u8 {
    let steps = match std::fs::read_to_string(path)
        .map_err(Error::from)
        .and_then(|s| serde_json::from_str::<Pipeline>(&s).map_err(Error::from))
    {
        Ok(p) => p.steps,
        Err(e) => {
            eprintln!("error: pipeline {}: {e}", path.display());
            return 1;
        }
    };
    for (k, step) in steps.iter().enumerate() {
        let mut argv = vec!["spun4d".to_string()];
        if let Some(c) = config {
            argv.push("--config".into());
            argv.push(c.display().to_string());
        }
        argv.extend(step.iter().cloned());
        eprintln!("pipeline step {}: {}", k + 1, step.join(" "));
        let code = run(&argv);
        if code != 0 {
            return code;
        }
    }
    0
}

fn dispatch(cmd: Command, argv: &[String], cfg: &Config) -> Result<Outcome> {
    let mut rec = Recorder::new(argv, cfg);
    let outcome = match cmd {
        Command::Catalog { json } => catalog(json)?,
        Command::Spin { knot, poly, cheb_degree, o } => {
            let arc = checked_arc(&knot)?;
            let doc = if poly {
                let ps = polynomial_spin(&arc, cheb_degree.unwrap_or(cfg.cheb_degree))?;
                println!("Chebyshev error: cos {:.3e}, sin {:.3e}", ps.cos_fit.max_error, ps.sin_fit.max_error);
                SurfaceDoc {
                    label: format!("polynomial spin {}", arc.name),
                    arc: Some(arc),
                    perturbation: None,
                    shape: Shape::Poly(ps.map),
                }
            } else {
                SurfaceDoc { label: format!("spin {}", arc.name), shape: Shape::Expr(spin(&arc)), arc: Some(arc), perturbation: None }
            };
            surface_outputs(&doc, &o, cfg, &mut rec)?
        }
        Command::Twistspin { knot, k, t1, t2, d1, d2, o } => {
            let arc = checked_arc(&knot)?;
            let axis = match (t1, t2) {
                (Some(a), Some(b)) => TwistAxis::new(&arc, a, b)?,
                _ => TwistAxis::from_hint(&arc)?,
            };
            let bump = match (d1, d2) {
                (Some(a), Some(b)) => Bump::new(a, b)?,
                _ => choose_bump(&arc, &axis)?,
            };
            println!("axis t1 = {}, t2 = {}; bump d1 = {}, d2 = {}", axis.t1, axis.t2, bump.d1, bump.d2);
            let s = twist_spin(&arc, &axis, bump, k)?;
            let doc = SurfaceDoc { label: format!("{k}-twist spin {}", arc.name), arc: Some(arc), perturbation: None, shape: Shape::Expr(s) };
            surface_outputs(&doc, &o, cfg, &mut rec)?
        }
        Command::Polynomialize { input, cheb_degree, bump_degree, out } => {
            let d = SurfaceDoc::load(&input)?;
            let Shape::Expr(s) = &d.shape else {
                return Err(Error::InvalidParameter(format!("{} is already polynomial", input.display())));
            };
            let mode = bump_degree.or(cfg.bump_degree).map_or(BumpMode::Exact, BumpMode::Degree);
            let p = polynomialize_twist(s, cheb_degree.unwrap_or(cfg.cheb_degree), mode)?;
            for (label, e) in &p.fit_log.fits {
                println!("fit {label}: max error {e:.3e}");
                if *e > 1e-2 {
                    rec.warn(format!("fit of {label} is poor ({e:.3e}); raise --cheb-degree / --bump-degree"));
                }
            }
            println!("max deviation from input: {:.3e}", p.deviation);
            let shape = match PolyMap4::from_surface(&p.surface) {
                Ok(m) => Shape::Poly(m),
                Err(_) => Shape::Expr(p.surface),
            };
            let doc = SurfaceDoc { label: format!("polynomialized {}", d.label), arc: d.arc, perturbation: None, shape };
            doc.save(&out)?;
            rec.output(&out);
            Outcome::Done
        }
        Command::Approx { which: ApproxCommand::Bernstein { input, degree, out } } => {
            let d = SurfaceDoc::load(&input)?;
            let degree = degree.unwrap_or(cfg.bernstein_degree);
            let (td, thd) = (d.t_domain(), d.theta_domain());
            let to_dom = move |t: f64, s: f64| (td.lerp(0.5 * (t + 1.0)), thd.lerp(0.5 * (s + 1.0)));
            let samples = bernstein_lattice(degree, |t, s| {
                let (a, b) = to_dom(t, s);
                d.eval(a, b)
            });
            let coords = bernstein_fit2(&samples, degree)?;
            let unit = Interval::symmetric(1.0);
            let map = PolyMap4::new(coords, unit, unit, d.topology());
            let n = 100;
            let mut err = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let (t, s) = (unit.node(i, n), unit.node(j, n));
                    let (a, b) = to_dom(t, s);
                    let (p, q) = (map.eval(t, s), d.eval(a, b));
                    err = (0..4).map(|k| (p[k] - q[k]).abs()).fold(err, f64::max);
                }
            }
            println!("Bernstein degree {degree}: max deviation {err:.3e} on a {n}×{n} grid");
            let doc = SurfaceDoc { label: format!("Bernstein {degree} of {}", d.label), arc: d.arc, perturbation: None, shape: Shape::Poly(map) };
            doc.save(&out)?;
            rec.output(&out);
            Outcome::Done
        }
        Command::Verify { input, grid, image_tol, rank_tol, family, half_degree, report } => {
            let d = SurfaceDoc::load(&input)?;
            let mut c = cfg.clone();
            if let Some(n) = grid {
                c.verify_grid = (n, n);
            }
            if let Some(x) = image_tol {
                c.image_tol = x;
            }
            if let Some(x) = rank_tol {
                c.rank_tol = x;
            }
            if let Some(n) = half_degree {
                c.half_degree = n;
            }
            let path = report.unwrap_or_else(|| input.with_extension("verify.json"));
            verify_doc(&d, &c, family, &path, &mut rec)?
        }
        Command::Project { input, plane, matrix, format, out, grid } => {
            let d = SurfaceDoc::load(&input)?;
            let proj = match matrix {
                Some(m) => Projection::matrix(parse_matrix(&m)?)?,
                None => plane.parse()?,
            };
            let n = grid.map_or(cfg.export_grid, |n| (n, n));
            write_surface(&d, &proj, n, format, &out, &mut rec)?;
            Outcome::Done
        }
        Command::Slice { input, axis, values, format, out_dir, grid } => {
            let d = SurfaceDoc::load(&input)?;
            let n = grid.map_or(cfg.export_grid, |n| (n, n));
            let ax = axis_char(&axis)?;
            std::fs::create_dir_all(&out_dir)?;
            for (k, &v) in values.iter().enumerate() {
                let cs = slice(&d, ax, v, n.0, n.1)?;
                let p = out_dir.join(format!("slice_{ax}_{k:03}.{}", format.extension()));
                export_slices(&cs, format, &p)?;
                println!("{ax} = {v}: {} curve(s) -> {}", cs.curves.len(), p.display());
            }
            rec.output(&out_dir);
            Outcome::Done
        }
        Command::Sweep { input, axis, count, format, out_dir, grid } => {
            let d = SurfaceDoc::load(&input)?;
            let n = grid.map_or(cfg.export_grid, |n| (n, n));
            write_sweep(&d, &axis, count, format, &out_dir, n)?;
            rec.output(&out_dir);
            Outcome::Done
        }
        Command::Export { input, format, out, plane, grid } => {
            let d = SurfaceDoc::load(&input)?;
            let n = grid.map_or(cfg.export_grid, |n| (n, n));
            write_surface(&d, &plane.parse()?, n, format, &out, &mut rec)?;
            Outcome::Done
        }
    };
    if let Some(p) = rec.finish()? {
        println!("manifest: {}", p.display());
    }
    Ok(outcome)
}

fn catalog(json: bool) -> Result<Outcome> {
    let arcs: Vec<KnotArc> = CATALOG.iter().map(|n| get_knot(n)).collect::<Result<_>>()?;
    if json {
        let rows: Vec<_> = arcs
            .iter()
            .map(|a| {
                serde_json::json!({
                    "name": a.name,
                    "degrees": a.degrees(),
                    "interval": a.ab,
                    "crossings": a.crossings.len(),
                    "axis": a.axis_hint,
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        for a in &arcs {
            let [f, g, h] = a.degrees();
            println!(
                "{:<14} degrees (f, g, h) = ({f}, {g}, {h})  t in [{:.6}, {:.6}]  crossings {}",
                a.name,
                a.ab.lo,
                a.ab.hi,
                a.crossings.len()
            );
        }
    }
    Ok(Outcome::Done)
}

/// Load an arc and insist it meets the boundary plane properly.
fn checked_arc(spec: &str) -> Result<KnotArc> {
    let arc = load_knot(spec)?;
    let r = boundary_report(&arc);
    if !r.ok() {
        return Err(Error::InvalidKnot(format!("{}: boundary check failed: {r:?}", arc.name)));
    }
    Ok(arc)
}

fn axis_char(s: &str) -> Result<char> {
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) if "xyzwXYZW".contains(c) => Ok(c.to_ascii_lowercase()),
        _ => Err(Error::BadAxes(format!("`{s}` is not one of x, y, z, w"))),
    }
}

fn parse_matrix(s: &str) -> Result<[[f64; 4]; 3]> {
    let bad = || Error::BadAxes(format!("`{s}` is not a 3×4 matrix"));
    let rows: Vec<[f64; 4]> = s
        .split(';')
        .map(|r| {
            let v: Vec<f64> = r.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
            <[f64; 4]>::try_from(v).map_err(|_| bad())
        })
        .collect::<Result<_>>()?;
    rows.try_into().map_err(|_| bad())
}

fn scan_options(d: &SurfaceDoc, c: &Config) -> ScanOptions {
    ScanOptions::for_surface(d, c.verify_grid, c.rank_tol, c.image_tol, c.param_sep_factor, c.max_collisions)
}

fn verify_doc(d: &SurfaceDoc, c: &Config, family: bool, report: &Path, rec: &mut Recorder) -> Result<Outcome> {
    let opt = scan_options(d, c);
    let r = verify_surface(d, d.arc.as_ref(), &opt)?;
    println!(
        "rank: {} (min σ2/σ1 = {:.3e}); collisions: {}; boundary: {}",
        if r.rank_ok { "ok" } else { "FAILED" },
        r.min_singular_ratio,
        r.collision_total,
        r.boundary_ok.map_or("n/a", |b| if b { "ok" } else { "FAILED" })
    );
    let mut passed = r.passed();
    let mut doc = serde_json::json!({ "surface": serde_json::to_value(&r)? });
    if family {
        let Shape::Poly(map) = &d.shape else {
            return Err(Error::InvalidParameter("--family needs a polynomial surface".into()));
        };
        let map = map.to_unit_square();
        let fopt = ScanOptions::for_surface(&map, c.verify_grid, c.rank_tol, c.image_tol, c.param_sep_factor, c.max_collisions);
        let pairs = xy_coincidences(&map, c.coincidence_grid.0, c.coincidence_grid.1, fopt.param_sep)?;
        let (spec, _) = odd_perturbation(map.coords(), c.half_degree, &pairs)?;
        let fam = isotopy_family_check(&map, &spec, &c.family_samples, &fopt)?;
        println!("perturbation: {} pairs, ε = {:.6e}", pairs.len(), spec.epsilon);
        for m in &fam.members {
            println!("  u = {:<5} rank {} collisions {}", m.u, if m.rank_ok { "ok" } else { "FAILED" }, m.collisions);
        }
        passed &= fam.ok();
        doc["family"] = serde_json::to_value(&fam)?;
        doc["perturbation"] = serde_json::to_value(spec)?;
    }
    doc["passed"] = passed.into();
    std::fs::write(report, to_json9(&doc)?)?;
    rec.output(report);
    rec.manifest.verification_passed = Some(passed);
    println!("report: {}", report.display());
    if passed {
        println!("verification passed (no failure detected at this resolution)");
        Ok(Outcome::Done)
    } else {
        println!("verification FAILED");
        Ok(Outcome::VerificationFailed)
    }
}

fn write_surface(d: &SurfaceDoc, proj: &Projection, n: (usize, usize), format: Format, out: &Path, rec: &mut Recorder) -> Result<()> {
    let g = sample_surface(d, n.0, n.1)?;
    match format {
        Format::Csv => {
            export_grid(&g, Format::Csv, out)?;
            rec.output(out);
            Ok(())
        }
        _ => {
            let m = to_mesh(&project(&g, proj));
            if m.degenerate_faces > 0 {
                rec.warn(format!("{}: {} zero-area faces (folds of the projection)", out.display(), m.degenerate_faces));
            }
            export_mesh(&m, format, out)?;
            rec.output(out);
            Ok(())
        }
    }
}

fn write_sweep(d: &SurfaceDoc, axis: &str, count: usize, format: Format, dir: &Path, n: (usize, usize)) -> Result<()> {
    let ax = axis_char(axis)?;
    let idx = "xyzw".find(ax).expect("validated axis");
    let (lo, hi) = coordinate_range(&sample_surface(d, n.0, n.1)?, idx);
    let values = sweep_values(lo, hi, count);
    std::fs::create_dir_all(dir)?;
    for (k, cs) in sweep(d, ax, &values, n.0, n.1)?.iter().enumerate() {
        export_slices(cs, format, &dir.join(format!("slice_{ax}_{k:03}.{}", format.extension())))?;
    }
    println!("{count} slices along {ax} in [{lo:.6}, {hi:.6}] -> {}", dir.display());
    Ok(())
}

fn surface_outputs(d: &SurfaceDoc, o: &Outputs, cfg: &Config, rec: &mut Recorder) -> Result<Outcome> {
    if let Some(p) = &o.save {
        d.save(p)?;
        rec.output(p);
    }
    if o.export.is_some() && o.out.is_none() {
        return Err(Error::InvalidParameter("--export needs --out".into()));
    }
    if o.verify {
        let report = o.report.clone().unwrap_or_else(|| {
            o.out.as_ref().or(o.save.as_ref()).map_or_else(|| PathBuf::from("verify.json"), |p| p.with_extension("verify.json"))
        });
        if let Outcome::VerificationFailed = verify_doc(d, cfg, false, &report, rec)? {
            rec.warn("verification failed; exports skipped");
            return Ok(Outcome::VerificationFailed);
        }
    }
    if let (Some(format), Some(out)) = (o.export, &o.out) {
        write_surface(d, &o.plane.parse()?, cfg.export_grid, format, out, rec)?;
        println!("wrote {}", out.display());
    }
    if let Some(axis) = &o.sweep {
        write_sweep(d, axis, o.count, o.slice_format, &o.out_dir, cfg.export_grid)?;
        rec.output(&o.out_dir);
    }
    if rec.manifest.outputs.is_empty() {
        println!("{}: nothing written (use --save, --export, --sweep or --verify)", d.label);
    }
    Ok(Outcome::Done)
}
