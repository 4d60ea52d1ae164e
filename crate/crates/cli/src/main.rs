//! `planar-morse`: command-line front end.
//!
//! Exit codes: 0 success, 1 a theorem violation on a verified solution (or a
//! failed replication fact), 2 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use planar_morse::classify::{analyze, Analysis, Tolerances};
use planar_morse::field::io::{fmt_f64, read_field_file, write_field_file};
use planar_morse::field::{Domain, Nonlinearity, Point, Rect, ScalarField};
use planar_morse::index::{gradient_index, robust_index};
use planar_morse::levelset::{curvature_at, extract_level, min_curvature_on_curve};
use planar_morse::replicate::{run_replication, CASE_IDS};
use planar_morse::report::{to_json, ARTIFACT_VERSION};
use planar_morse::solver::{solve_dirichlet, SolveConfig};

#[derive(Parser)]
#[command(name = "planar-morse", version, about = "Critical points of solutions of -Δu = f(u) in the plane")]
struct Cli {
    /// Worker threads; 1 gives bitwise reproducible output.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output directory. Reports go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find and classify every critical point of a field.
    Analyze(AnalyzeArgs),
    /// Solve a Dirichlet problem described by a config file.
    Solve {
        config: PathBuf,
        /// Also compute this many eigenvalues of the linearized operator.
        #[arg(long, default_value_t = 0)]
        spectrum: usize,
    },
    /// Trace level sets and report their minimal curvature.
    Levelset {
        field: PathBuf,
        /// Comma-separated levels.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        levels: Vec<f64>,
        /// Read levels as fractions of the sampled maximum of u.
        #[arg(long)]
        fractions: bool,
        #[command(flatten)]
        domain: DomainArgs,
        /// Tracing cell size; default is the bbox diameter / 512.
        #[arg(long)]
        cell: Option<f64>,
    },
    /// Index of the gradient at a point.
    Index {
        field: PathBuf,
        /// `x,y`
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1, default_value = "0,0")]
        at: Vec<f64>,
        /// Fixed circle radius instead of the dyadic ladder.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Run a replication case, or `all`.
    Replicate { id: String },
    /// Check the PDE residual and the structure identities of a solution.
    Verify(AnalyzeArgs),
}

#[derive(Args, Clone)]
struct AnalyzeArgs {
    field: PathBuf,
    /// Nonlinearity f(u) as a prefix expression in u, e.g. `1` or `(exp u)`.
    #[arg(long)]
    f: Option<String>,
    #[command(flatten)]
    domain: DomainArgs,
    /// Seed lattice spacing; default is the bbox diameter / 128.
    #[arg(long)]
    seed_spacing: Option<f64>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args, Clone)]
struct DomainArgs {
    /// `xmin,xmax,ymin,ymax`; default is the field bounds, else [-1,1]².
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    bbox: Option<Vec<f64>>,
    /// `bbox` uses the whole rectangle, `positive` only where u > 0.
    #[arg(long, value_enum, default_value_t = DomainKind::Bbox)]
    domain: DomainKind,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DomainKind {
    Bbox,
    Positive,
}

#[derive(Args, Clone)]
struct TolArgs {
    /// Newton stops at |∇u| below this fraction of the gradient scale.
    #[arg(long, default_value_t = Tolerances::default().gradient)]
    tol_gradient: f64,
    /// PDE residual gate relative to max |u|.
    #[arg(long, default_value_t = Tolerances::default().residual)]
    tol_residual: f64,
    /// Merge radius as a fraction of the seed spacing.
    #[arg(long, default_value_t = Tolerances::default().merge_fraction)]
    tol_merge: f64,
    /// Taylor jet order.
    #[arg(long, default_value_t = Tolerances::default().jet_order)]
    tol_jet_order: usize,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            gradient: self.tol_gradient,
            residual: self.tol_residual,
            merge_fraction: self.tol_merge,
            jet_order: self.tol_jet_order,
        }
    }
}

/// A failure and the exit code it maps to.
struct Failure(u8, String);

impl From<planar_morse::Error> for Failure {
    fn from(e: planar_morse::Error) -> Self {
        Failure(2, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(2, e.to_string())
    }
}

type Run<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct Manifest {
    command: String,
    inputs: Vec<String>,
    parameters: Value,
    tolerances: Option<Tolerances>,
    artifact_version: &'static str,
    threads: usize,
    wall_clock_seconds: f64,
    outputs: Vec<String>,
}

struct Ctx {
    out: Option<PathBuf>,
    threads: usize,
    start: Instant,
}

impl Ctx {
    fn manifest(&self, command: &str, inputs: &[&Path], parameters: Value, tolerances: Option<Tolerances>, outputs: Vec<String>) -> Manifest {
        Manifest {
            command: command.into(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            parameters,
            tolerances,
            artifact_version: ARTIFACT_VERSION,
            threads: self.threads,
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
            outputs,
        }
    }

    fn out_dir(&self) -> Run<PathBuf> {
        let d = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn path_in_out(&self, name: &str) -> Run<Option<PathBuf>> {
        match &self.out {
            Some(_) => Ok(Some(self.out_dir()?.join(name))),
            None => Ok(None),
        }
    }

    /// Writes `{"manifest": .., "result": ..}` to `name` in `--out`, or stdout.
    fn emit<T: Serialize>(&self, name: &str, mut manifest: Manifest, result: &T) -> Run<()> {
        let target = self.path_in_out(name)?;
        if let Some(p) = &target {
            manifest.outputs.push(p.display().to_string());
        }
        let text = to_json(&json!({ "manifest": manifest, "result": result }))?;
        match target {
            Some(p) => fs::write(&p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let ctx = Ctx { out: cli.out.clone(), threads: cli.threads.max(1), start: Instant::now() };
    match pool.install(|| dispatch(&ctx, cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(ctx: &Ctx, cmd: Command) -> Run<u8> {
    match cmd {
        Command::Analyze(a) => cmd_analyze(ctx, &a, false),
        Command::Verify(a) => cmd_analyze(ctx, &a, true),
        Command::Solve { config, spectrum } => cmd_solve(ctx, &config, spectrum),
        Command::Levelset { field, levels, fractions, domain, cell } => cmd_levelset(ctx, &field, &levels, fractions, &domain, cell),
        Command::Index { field, at, radius } => cmd_index(ctx, &field, &at, radius),
        Command::Replicate { id } => cmd_replicate(ctx, &id),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure(2, msg.into())
}

fn build_domain(u: &ScalarField, args: &DomainArgs) -> Run<Domain> {
    let rect = match &args.bbox {
        Some(b) if b.len() == 4 && b[0] < b[1] && b[2] < b[3] => Rect::new(b[0], b[1], b[2], b[3]),
        Some(_) => return Err(usage("--bbox needs xmin,xmax,ymin,ymax with min < max")),
        None => u.bounds().unwrap_or(Rect::new(-1.0, 1.0, -1.0, 1.0)),
    };
    Ok(match args.domain {
        DomainKind::Bbox => Domain::rect(rect),
        DomainKind::Positive => Domain::with_level(rect, u.clone()),
    })
}

fn cmd_analyze(ctx: &Ctx, a: &AnalyzeArgs, verify: bool) -> Run<u8> {
    let u = read_field_file(&a.field)?;
    let f = a.f.as_deref().map(Nonlinearity::parse).transpose()?;
    if verify && f.is_none() {
        return Err(usage("verify needs --f"));
    }
    let domain = build_domain(&u, &a.domain)?;
    let spacing = a.seed_spacing.unwrap_or(domain.rect.diameter() / 128.0);
    let tol = a.tol.tolerances();
    let an = analyze(&u, &domain, f.as_ref(), spacing, &tol)?;
    let params = json!({
        "f": a.f,
        "bbox": [domain.rect.xmin, domain.rect.xmax, domain.rect.ymin, domain.rect.ymax],
        "domain": a.domain.domain,
        "seed_spacing": spacing,
        "field_kind": u.kind_name(),
    });
    let name = if verify { "verify" } else { "analyze" };
    let manifest = ctx.manifest(name, &[&a.field], params, Some(tol), vec![]);
    let violations = an.violations();
    if verify {
        ctx.emit("verify.json", manifest, &verify_summary(&an))?;
        if !an.verified_solution {
            return Err(Failure(2, "the field does not solve the PDE within the residual tolerance".into()));
        }
    } else {
        ctx.emit("analyze.json", manifest, &an)?;
    }
    eprintln!(
        "{} critical point(s), verified solution: {}, theorem violations: {violations}",
        an.critical_points.len(),
        an.verified_solution
    );
    Ok(if violations > 0 { 1 } else { 0 })
}

fn verify_summary(an: &Analysis) -> Value {
    let points: Vec<Value> = an
        .critical_points
        .iter()
        .map(|r| {
            json!({
                "location": r.point.location,
                "class": r.class,
                "n": r.n,
                "chain_residuals": r.chain_residuals,
                "inequality_slack": r.inequality_slack,
                "equality_gap": r.equality_gap,
                "theorem_violations": r.theorem_violations,
            })
        })
        .collect();
    json!({
        "pde_residual": an.gate,
        "verified_solution": an.verified_solution,
        "violations": an.violations(),
        "points": points,
    })
}

fn cmd_solve(ctx: &Ctx, config: &Path, spectrum: usize) -> Run<u8> {
    let cfg = SolveConfig::read(config)?;
    let sol = solve_dirichlet(&cfg, None)?;
    let dir = ctx.out_dir()?;
    let grid = dir.join("solution.grid");
    write_field_file(&grid, &ScalarField::Grid(sol.field.clone()))?;
    let spec = if spectrum > 0 { Some(sol.spectrum(spectrum)?) } else { None };
    let result = json!({
        "iterations": sol.iterations,
        "residual": sol.residual,
        "unknowns": sol.disc.len(),
        "h": cfg.h,
        "spectrum": spec,
    });
    let params = json!({ "config": cfg.to_string() });
    let manifest = ctx.manifest("solve", &[config], params, None, vec![grid.display().to_string()]);
    let mut m = manifest;
    let report = dir.join("solve.json");
    m.outputs.push(report.display().to_string());
    fs::write(&report, to_json(&json!({ "manifest": m, "result": result }))?)?;
    eprintln!("solved in {} Newton step(s), residual {}", sol.iterations, fmt_f64(sol.residual));
    Ok(0)
}

fn sampled_max(u: &ScalarField, d: &Domain) -> f64 {
    let r = d.rect;
    let m = 256;
    let mut best = f64::NEG_INFINITY;
    for j in 0..=m {
        for i in 0..=m {
            let p = Point::new(
                r.xmin + (r.xmax - r.xmin) * i as f64 / m as f64,
                r.ymin + (r.ymax - r.ymin) * j as f64 / m as f64,
            );
            if d.contains(p) {
                if let Ok(v) = u.eval(p) {
                    best = best.max(v);
                }
            }
        }
    }
    best
}

fn cmd_levelset(ctx: &Ctx, field: &Path, levels: &[f64], fractions: bool, dargs: &DomainArgs, cell: Option<f64>) -> Run<u8> {
    let u = read_field_file(field)?;
    let domain = build_domain(&u, dargs)?;
    let cell = cell.unwrap_or(domain.rect.diameter() / 512.0);
    let scale = if fractions { sampled_max(&u, &domain) } else { 1.0 };
    let dir = ctx.out_dir()?;
    let mut outputs = Vec::new();
    let mut summary = Vec::new();
    for (li, &lv) in levels.iter().enumerate() {
        let c = lv * scale;
        let curves = extract_level(&u, c, &domain, cell)?;
        let mut per_curve = Vec::new();
        let mut kmin_level = f64::INFINITY;
        for (ci, cv) in curves.iter().enumerate() {
            let name = format!("curve_{li}_{ci}.csv");
            let mut csv = String::from("level,x,y,k\n");
            for v in &cv.vertices {
                let k = curvature_at(&u, *v).unwrap_or(f64::NAN);
                csv.push_str(&format!("{},{},{},{}\n", fmt_f64(c), fmt_f64(v.x), fmt_f64(v.y), fmt_f64(k)));
            }
            let path = dir.join(&name);
            fs::write(&path, csv)?;
            outputs.push(path.display().to_string());
            let km = min_curvature_on_curve(&u, cv);
            if let Ok((_, k)) = km {
                kmin_level = kmin_level.min(k);
            }
            per_curve.push(json!({
                "file": name,
                "closed": cv.closed,
                "vertices": cv.vertices.len(),
                "k_min": km.as_ref().ok().map(|m| m.1),
                "k_min_at": km.as_ref().ok().map(|m| m.0),
            }));
        }
        summary.push(json!({
            "level": c,
            "curves": per_curve,
            "k_min": kmin_level.is_finite().then_some(kmin_level),
        }));
    }
    let params = json!({ "levels": levels, "fractions": fractions, "scale": scale, "cell": cell });
    let mut m = ctx.manifest("levelset", &[field], params, None, outputs);
    let report = dir.join("levelset.json");
    m.outputs.push(report.display().to_string());
    fs::write(&report, to_json(&json!({ "manifest": m, "result": { "levels": summary } }))?)?;
    Ok(0)
}

fn cmd_index(ctx: &Ctx, field: &Path, at: &[f64], radius: Option<f64>) -> Run<u8> {
    if at.len() != 2 {
        return Err(usage("--at needs x,y"));
    }
    let u = read_field_file(field)?;
    let p = Point::new(at[0], at[1]);
    let ix = match radius {
        Some(r) => gradient_index(&u, p, r, 64)?,
        None => robust_index(&u, p)?,
    };
    let manifest = ctx.manifest("index", &[field], json!({ "at": [p.x, p.y], "radius": radius }), None, vec![]);
    ctx.emit("index.json", manifest, &ix)?;
    Ok(0)
}

fn cmd_replicate(ctx: &Ctx, id: &str) -> Run<u8> {
    let ids: Vec<&str> = if id == "all" { CASE_IDS.to_vec() } else { vec![id] };
    let mut all_passed = true;
    for id in ids {
        let case = run_replication(id)?;
        for f in case.facts.iter().filter(|f| !f.passed) {
            eprintln!("{id}: FAIL {} (expected {}, actual {:?})", f.quantity, f.expected, f.actual);
        }
        eprintln!("{id}: {}", if case.passed { "pass" } else { "FAIL" });
        all_passed &= case.passed;
        let manifest = ctx.manifest("replicate", &[], json!({ "id": id }), None, vec![]);
        ctx.emit(&format!("replicate-{id}.json"), manifest, &case)?;
    }
    Ok(if all_passed { 0 } else { 1 })
}
