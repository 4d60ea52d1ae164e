//! Acceptance criteria, one line per criterion.
//!
//! Runs with a plain `main` so the output is a readable table; the process
//! exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use planar_morse::classify::{
    analyze, chain_tolerances, classify_point, dyadic_radii, expansion_residual_slope, ChainCase, ClassifyContext,
    CriticalPoint, CriticalPointReport, Parity, PointClass, Tolerances,
};
use planar_morse::field::{rat, rat_int, Expr, FieldExpr, GridField, Rational};
use planar_morse::index::robust_index;
use planar_morse::jets::jet;
use planar_morse::levelset::directional_nodal_set;
use planar_morse::replicate::{example_harmonic, example_quartic, example_star_shaped, run_replication, ReplicationCase};
use planar_morse::solver::{convergence_order, solve_dirichlet, SolveConfig};
use planar_morse::{Domain, Error, Nonlinearity, Point, Poly2, Rect, ScalarField};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

type Outcome = std::result::Result<String, String>;

fn lib<T>(r: planar_morse::Result<T>, what: &str) -> std::result::Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// A field with the domain and nonlinearity it solves.
struct Sample {
    name: &'static str,
    u: ScalarField,
    domain: Domain,
    f: Nonlinearity,
    spacing: f64,
}

fn disk(a: f64, b: f64) -> Domain {
    let level = Poly2::from_terms([
        (0, 0, rat_int(1)),
        (2, 0, -Rational::from_float(1.0 / (a * a)).unwrap()),
        (0, 2, -Rational::from_float(1.0 / (b * b)).unwrap()),
    ]);
    Domain::with_level(Rect::new(-a, a, -b, b), level.into())
}

/// `(1 - x²/a² - y²/b²) / (2/a² + 2/b²)`, the torsion function of an ellipse.
fn ellipse_torsion(a: i64, b: i64) -> Poly2 {
    let (a2, b2) = (rat(1, a * a), rat(1, b * b));
    let k = Rational::from_integer(1.into()) / (rat_int(2) * &a2 + rat_int(2) * &b2);
    Poly2::from_terms([(0, 0, k.clone()), (2, 0, -(&a2 * &k)), (0, 2, -(&b2 * &k))])
}

fn exact_corpus() -> std::result::Result<Vec<Sample>, String> {
    let one = Nonlinearity::constant(1.0);
    let zero = Nonlinearity::constant(0.0);
    let (q, qd) = lib(example_quartic(&rat(1, 200)), "quartic")?;
    let (s, sd) = lib(example_star_shaped(&rat(18, 1), &rat(1, 10000)), "star-shaped")?;
    let mut out = vec![
        Sample { name: "quartic", spacing: qd.rect.diameter() / 128.0, u: q.into(), domain: qd, f: one.clone() },
        Sample { name: "star-shaped", spacing: sd.rect.diameter() / 128.0, u: s.into(), domain: sd, f: one.clone() },
        Sample { name: "disk torsion", u: ellipse_torsion(1, 1).into(), domain: disk(1.0, 1.0), f: one.clone(), spacing: 1.0 / 16.0 },
        Sample { name: "ellipse torsion", u: ellipse_torsion(2, 1).into(), domain: disk(2.0, 1.0), f: one.clone(), spacing: 1.0 / 16.0 },
    ];
    let names = ["harmonic 2", "harmonic 3", "harmonic 4", "harmonic 5", "harmonic 6"];
    for (n, name) in (2..=6).zip(names) {
        let h = lib(example_harmonic(n, &rat_int(2), &rat_int(3)), "harmonic")?;
        let domain = Domain::rect(Rect::new(-0.5, 0.5, -0.5, 0.5));
        out.push(Sample { name, u: h.into(), domain, f: zero.clone(), spacing: 1.0 / 16.0 });
    }
    Ok(out)
}

fn closed_form_corpus() -> std::result::Result<Vec<Sample>, String> {
    let expr = |src: &str| lib(Expr::parse(src), src);
    let square = Rect::new(-0.5, 0.5, -0.5, 0.5);
    let mut out = vec![
        Sample {
            name: "bessel",
            u: planar_morse::replicate::example_radial_bessel(),
            domain: Domain::rect(square),
            f: Nonlinearity::identity(),
            spacing: 1.0 / 32.0,
        },
        Sample {
            name: "liouville",
            u: FieldExpr::new(expr("(log (/ 8 (^ (+ 1 (* x x) (* y y)) 2)))")?).into(),
            domain: Domain::rect(Rect::new(-1.0, 1.0, -1.0, 1.0)),
            f: lib(Nonlinearity::parse("(exp u)"), "nonlinearity")?,
            spacing: 1.0 / 16.0,
        },
    ];
    let torsion = lib(solve_dirichlet(&SolveConfig::unit_square(1.0 / 64.0, Nonlinearity::constant(1.0)), None), "solve")?;
    let g: GridField = torsion.field;
    let disk_grid = lib(solve_dirichlet(&SolveConfig::unit_disk(1.0 / 64.0, Nonlinearity::constant(1.0)), None), "solve")?;
    out.push(Sample {
        name: "grid disk torsion",
        u: disk_grid.field.into(),
        domain: disk(1.0, 1.0),
        f: Nonlinearity::constant(1.0),
        spacing: 1.0 / 16.0,
    });
    out.push(Sample {
        name: "grid torsion",
        u: g.into(),
        domain: Domain::rect(Rect::new(0.0, 1.0, 0.0, 1.0)),
        f: Nonlinearity::constant(1.0),
        spacing: 1.0 / 16.0,
    });
    Ok(out)
}

fn c1_index_table() -> Outcome {
    let t0 = Instant::now();
    let mut runner = TestRunner::deterministic();
    let coeff = (-20i64..=20, 1i64..=9);
    let mut checked = 0;
    for n in 2..=6u32 {
        let mut mixes = 0;
        while mixes < 5 {
            let ((an, ad), (bn, bd)) = (coeff.clone(), coeff.clone()).new_tree(&mut runner).unwrap().current();
            let (a, b) = (rat(an, ad), rat(bn, bd));
            let p = match example_harmonic(n, &a, &b) {
                Ok(p) => p,
                Err(Error::ZeroMix) => continue,
                Err(e) => return Err(e.to_string()),
            };
            mixes += 1;
            let i = lib(robust_index(&p.into(), Point::ORIGIN), "index")?;
            ensure(i.value == 1 - n as i64, || format!("n = {n}, (a, b) = ({a}, {b}): index {}", i.value))?;
            checked += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("{checked} fields, all 1 - n, {secs:.2} s"))
}

fn c2_degeneracy_gate() -> Outcome {
    let mut corpus = exact_corpus()?;
    corpus.extend(closed_form_corpus()?);
    let (mut fields, mut points, mut with_index) = (0, 0, 0);
    for s in &corpus {
        let an = lib(analyze(&s.u, &s.domain, Some(&s.f), s.spacing, &Tolerances::default()), s.name)?;
        ensure(an.verified_solution, || format!("{}: not verified", s.name))?;
        ensure(an.failures.is_empty(), || format!("{}: {:?}", s.name, an.failures))?;
        ensure(an.violations() == 0, || format!("{}: {} violations", s.name, an.violations()))?;
        fields += 1;
        for r in &an.critical_points {
            points += 1;
            let kernel = r.jet.is_zero(0, 2);
            if let Some(i) = r.index {
                with_index += 1;
                ensure(!kernel || i.value <= -2, || format!("{}: u_yy = 0 with index {}", s.name, i.value))?;
                ensure(i.value < -1 || !kernel, || format!("{}: index {} with u_yy = 0", s.name, i.value))?;
            }
        }
    }
    Ok(format!("{fields} verified fields, {points} critical points, {with_index} with an index, 0 violations"))
}

fn failed_facts(c: &ReplicationCase) -> String {
    let bad: Vec<String> = c
        .facts
        .iter()
        .filter(|f| !f.passed)
        .map(|f| format!("{} (expected {}, got {:?}{})", f.quantity, f.expected, f.actual, f.detail.as_deref().map(|d| format!(", {d}")).unwrap_or_default()))
        .collect();
    bad.join("; ")
}

fn replicated(id: &str) -> std::result::Result<ReplicationCase, String> {
    let c = lib(run_replication(id), id)?;
    ensure(c.passed, || failed_facts(&c))?;
    Ok(c)
}

fn c3_quartic() -> Outcome {
    let c = replicated("example-4.1")?;
    Ok(format!("{} facts hold at alpha = 1/200", c.facts.len()))
}

fn c4_star_shaped() -> Outcome {
    let c = replicated("example-4.2")?;
    // with c = 1e-3 the set {u > 0} is not bounded near the origin
    let rejected = example_star_shaped(&rat(18, 1), &rat(1, 1000)).is_err();
    ensure(rejected, || "c = 1e-3 unexpectedly gives a closed domain".into())?;
    Ok(format!("{} facts hold at c = 1e-4; c = 1e-3 rejected as unbounded", c.facts.len()))
}

fn c5_bessel() -> Outcome {
    let c = replicated("radial-bessel")?;
    let r = c.critical_points.first().ok_or("no report at the origin")?;
    Ok(format!(
        "n = {:?}, l = {:?}, u_yy = {:.6}, u_xxy = {:.6}, u_xxxx = {:.6}",
        r.n,
        r.l,
        r.jet.coeff(0, 2),
        r.jet.coeff(2, 1),
        r.jet.coeff(4, 0)
    ))
}

fn case_of(r: &CriticalPointReport) -> ChainCase {
    if r.jet.is_zero(0, 2) {
        ChainCase::KernelDegenerate
    } else {
        ChainCase::UyyNonzero
    }
}

fn c6_chains() -> Outcome {
    let mut exact_points = 0;
    for s in exact_corpus()? {
        let an = lib(analyze(&s.u, &s.domain, Some(&s.f), s.spacing, &Tolerances::default()), s.name)?;
        for r in an.critical_points.iter().filter(|r| r.degenerate) {
            ensure(r.jet.is_exact(), || format!("{}: jet not exact", s.name))?;
            ensure(!r.chain_residuals.is_empty(), || format!("{}: no chain residuals", s.name))?;
            ensure(r.chain_residuals.iter().all(|v| *v == 0.0), || format!("{}: {:?}", s.name, r.chain_residuals))?;
            exact_points += 1;
        }
    }
    let grid = closed_form_corpus()?.pop().unwrap();
    let an = lib(analyze(&grid.u, &grid.domain, Some(&grid.f), grid.spacing, &Tolerances::default()), "grid")?;
    let r = an.critical_points.first().ok_or("grid torsion: no critical point")?;
    let n = r.n.ok_or("grid torsion: no minimal order")?;
    let bounds = chain_tolerances(&r.jet, n, case_of(r));
    ensure(!r.chain_residuals.is_empty() && r.chain_residuals.len() == bounds.len(), || "grid torsion: chain not checked".into())?;
    let worst = r.chain_residuals.iter().zip(&bounds).map(|(v, b)| v / b).fold(0.0f64, f64::max);
    ensure(worst <= 1.0, || format!("grid torsion residuals {:?} over bounds {:?}", r.chain_residuals, bounds))?;
    Ok(format!("{exact_points} exact degenerate points at 0; grid torsion at {worst:.3} of its bound"))
}

fn c7_expansion() -> Outcome {
    let radii = dyadic_radii(0.25, 6);
    let c = replicated("radial-bessel")?;
    let r = c.critical_points.first().ok_or("bessel: no report")?;
    let u = planar_morse::replicate::example_radial_bessel();
    let fit = lib(expansion_residual_slope(&u, r, &radii), "bessel fit")?;
    let sb = fit.slope.ok_or("bessel: no slope")?;
    ensure(sb >= 4.5, || format!("bessel slope {sb:.3}"))?;

    let u = planar_morse::replicate::example_cosine();
    let f = Nonlinearity::identity();
    let cp = CriticalPoint { isolated: planar_morse::classify::Isolation::CurveSuspected, ..lib(CriticalPoint::at(&u, Point::ORIGIN), "cos")? };
    let ctx = ClassifyContext { f: Some(&f), verified: true, domain: None };
    let r = lib(classify_point(&u, &cp, &ctx, &Tolerances::default()), "cos")?;
    let fit = lib(expansion_residual_slope(&u, &r, &radii), "cos fit")?;
    let sc = fit.slope.ok_or("cos: no slope")?;
    ensure(sc >= 3.5, || format!("cos slope {sc:.3}"))?;
    Ok(format!("slopes {sb:.2} (bessel) and {sc:.2} (cos y) over {} radii", radii.len()))
}

fn c8_solver() -> Outcome {
    let one = Nonlinearity::constant(1.0);
    let s = lib(solve_dirichlet(&SolveConfig::unit_square(1.0 / 64.0, one.clone()), None), "torsion")?;
    let u: ScalarField = s.field.into();
    let j = lib(jet(&u, Point::new(0.5, 0.5), 2), "torsion jet")?;
    let [uxx, uxy, uyy] = j.hessian();
    ensure(uxy.abs() <= 1e-6 * uxx.abs(), || format!("u_xy = {uxy:e}, u_xx = {uxx:e}"))?;
    ensure(uxx < 0.0 && uyy < 0.0, || format!("hessian ({uxx}, {uyy}) not negative"))?;

    let (q, qd) = lib(example_quartic(&rat(1, 200)), "quartic")?;
    let conv = lib(convergence_order(&SolveConfig::new(qd, 1.0, one.clone()), &q.into(), &[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]), "convergence")?;
    let order = conv.order.ok_or("convergence: exact, no order")?;
    ensure((1.5..=2.5).contains(&order), || format!("order {order:.3}"))?;

    let d = lib(solve_dirichlet(&SolveConfig::unit_disk(1.0 / 64.0, one), None), "disk")?;
    let l1 = lib(d.spectrum(1), "disk spectrum")?.eigenvalues[0];
    let rel = (l1 - 5.7832) / 5.7832;
    ensure(rel.abs() <= 0.01, || format!("disk lambda1 = {l1}"))?;
    Ok(format!("|u_xy/u_xx| = {:.1e}, order {order:.2}, disk lambda1 = {l1:.4} ({:+.2}%)", (uxy / uxx).abs(), 100.0 * rel))
}

fn c9_nodal() -> Outcome {
    let masks = [("disk", ellipse_torsion(1, 1), disk(1.0, 1.0)), ("ellipse", ellipse_torsion(2, 1), disk(2.0, 1.0))];
    let mut checked = 0;
    for (name, p, dom) in masks {
        let u: ScalarField = p.into();
        for k in 0..8 {
            let theta = std::f64::consts::PI * k as f64 / 8.0;
            let ns = lib(directional_nodal_set(&u, theta, &dom, 1.0 / 64.0), name)?;
            ensure(ns.boundary_points.len() == 2, || format!("{name}, theta = {theta:.3}: {} intersections", ns.boundary_points.len()))?;
            // the gradient is bounded away from zero on the boundary
            for b in &ns.boundary_points {
                let g = lib(u.gradient(*b), name)?;
                ensure(g[0].hypot(g[1]) > 1e-3, || format!("{name}: gradient vanishes at {b:?}"))?;
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} directions, 2 boundary intersections each"))
}

type Tuple = (PointClass, Option<usize>, Option<usize>, Option<Parity>, Option<i64>, (i8, i8, bool));

fn tuple(r: &CriticalPointReport) -> Tuple {
    (r.class, r.n, r.l, r.parity, r.index.map(|i| i.value), r.sign_pattern())
}

/// Classifies `v` at `q` the way `cp` was classified for the original field,
/// with distances multiplied by `scale`.
fn classify_at(v: &ScalarField, q: Point, cp: &CriticalPoint, scale: f64, f: &Nonlinearity) -> planar_morse::Result<Tuple> {
    let moved = CriticalPoint {
        location: q,
        gradient_norm: 0.0,
        isolated: cp.isolated,
        neighbor_distance: cp.neighbor_distance.map(|d| d * scale),
    };
    let ctx = ClassifyContext { f: Some(f), verified: true, domain: None };
    classify_point(v, &moved, &ctx, &Tolerances::default()).map(|r| tuple(&r))
}

fn c10_invariance() -> Outcome {
    let (c, s) = (rat(3, 5), rat(4, 5));
    let (cf, sf) = (0.6, 0.8);
    let z = rat_int(0);
    let mut compared = 0;
    for smp in exact_corpus()? {
        let p = smp.u.as_poly().unwrap();
        let an = lib(analyze(&smp.u, &smp.domain, Some(&smp.f), smp.spacing, &Tolerances::default()), smp.name)?;
        // v(x) = u(Rx) has its critical points at R^T p
        let rotated: ScalarField = p.rotate(&c, &s).into();
        let mut transforms: Vec<(String, ScalarField, Box<dyn Fn(Point) -> Point>, f64)> =
            vec![("rotation".into(), rotated, Box::new(move |q: Point| Point::new(cf * q.x + sf * q.y, -sf * q.x + cf * q.y)), 1.0)];
        for (num, den) in [(1i64, 2i64), (2, 1)] {
            let l = rat(num, den);
            let lf = num as f64 / den as f64;
            let v: ScalarField = p.compose_affine([[&l, &z], [&z, &l]], [&z, &z]).into();
            transforms.push((format!("scaling {num}/{den}"), v, Box::new(move |q: Point| Point::new(q.x / lf, q.y / lf)), 1.0 / lf));
        }
        for r in &an.critical_points {
            let base = lib(classify_at(&smp.u, r.point.location, &r.point, 1.0, &smp.f), smp.name)?;
            for (what, v, map, scale) in &transforms {
                let got = lib(classify_at(v, map(r.point.location), &r.point, *scale, &smp.f), smp.name)?;
                ensure(got == base, || format!("{}, {what}, point {:?}: {got:?} vs {base:?}", smp.name, r.point.location))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} transformed critical points match"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("index table", c1_index_table),
        ("degeneracy gate", c2_degeneracy_gate),
        ("quartic maximum", c3_quartic),
        ("star-shaped domain", c4_star_shaped),
        ("radial bessel", c5_bessel),
        ("harmonic chains", c6_chains),
        ("expansion remainder", c7_expansion),
        ("solver", c8_solver),
        ("nodal structure", c9_nodal),
        ("invariance", c10_invariance),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let out = run();
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("criterion {:>2} {name}: PASS ({msg}) [{secs:.1} s]", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({msg}) [{secs:.1} s]", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
