//! Explicit example fields and end-to-end replication runs.
//!
//! A case builds a field, runs the pipeline on it, and compares what comes
//! out against expected facts. Each fact records where its expected value
//! comes from ([`Basis`]).

use std::f64::consts::TAU;

use serde::Serialize;

use crate::classify::{
    analyze, classify_point, expansion_residual_slope, dyadic_radii, Analysis, ClassifyContext, CriticalPoint,
    CriticalPointReport, Isolation, PointClass, Tolerances,
};
use crate::error::{Error, Result};
use crate::field::special::{bessel_j, j1_first_zero};
use crate::field::{
    io::write_field, rat, rat_to_f64, Domain, Expr, FieldExpr, HarmonicPart, Nonlinearity, Point, Poly2, Rational,
    Rect, ScalarField,
};
use crate::index::{boundary_degree, robust_index};
use crate::jets::jet_exact;
use crate::levelset::{curvature_at, extract_level, min_curvature_on_curve};
use crate::solver::{solve_dirichlet, SolveConfig};

/// Registered case ids, in run order.
pub const CASE_IDS: [&str; 5] = ["example-4.1", "example-4.2", "radial-bessel", "cosine", "harmonic"];

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Stated for this example in the source material.
    Published,
    /// Computed by a method independent of the one under test.
    IndependentOracle,
    /// Follows from elementary facts.
    Elementary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|actual - expected| <= tolerance`
    Within,
    /// `actual <= expected`
    AtMost,
    /// `actual >= expected`
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fact {
    pub quantity: String,
    pub expected: f64,
    pub actual: Option<f64>,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub basis: Basis,
    pub passed: bool,
    /// Why `actual` is missing, when it is.
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationCase {
    pub id: String,
    pub description: String,
    /// Field files of the case, in the text field format.
    pub fields: Vec<String>,
    pub f: String,
    pub facts: Vec<Fact>,
    pub passed: bool,
    pub critical_points: Vec<CriticalPointReport>,
}

#[derive(Default)]
struct Facts(Vec<Fact>);

impl Facts {
    fn push(&mut self, quantity: &str, expected: f64, actual: Result<f64>, cmp: Comparison, tolerance: f64, basis: Basis) {
        let (actual, detail) = match actual {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let passed = actual.is_some_and(|a| match cmp {
            Comparison::Within => (a - expected).abs() <= tolerance,
            Comparison::AtMost => a <= expected,
            Comparison::AtLeast => a >= expected,
        });
        self.0.push(Fact { quantity: quantity.into(), expected, actual, comparison: cmp, tolerance, basis, passed, detail });
    }

    fn within(&mut self, q: &str, expected: f64, actual: Result<f64>, tol: f64, basis: Basis) {
        self.push(q, expected, actual, Comparison::Within, tol, basis);
    }

    fn exact(&mut self, q: &str, expected: f64, actual: Result<f64>, basis: Basis) {
        self.push(q, expected, actual, Comparison::Within, 0.0, basis);
    }

    fn flag(&mut self, q: &str, ok: Result<bool>, basis: Basis) {
        self.exact(q, 1.0, ok.map(|b| if b { 1.0 } else { 0.0 }), basis);
    }
}

fn missing(what: &str) -> Error {
    Error::InvalidArgument(format!("{what} not available"))
}

fn opt<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| missing(what))
}

// ---------------------------------------------------------------------------
// constructors

/// Rectangle hugging the component of `{u > 0}` that contains the origin.
///
/// The zero level is traced on `search`; the component must be bounded by a
/// single closed curve and be the only piece of `{u > 0}` in the returned
/// rectangle.
pub fn bounded_component(u: &ScalarField, search: Rect, cell: f64) -> Result<Rect> {
    if !(u.eval(Point::ORIGIN)? > 0.0) {
        return Err(Error::DomainEmpty);
    }
    let curves = extract_level(u, 0.0, &Domain::rect(search), cell)?;
    let outer = curves
        .iter()
        .filter(|c| c.closed && c.encloses(Point::ORIGIN))
        .min_by(|a, b| a.signed_area().abs().total_cmp(&b.signed_area().abs()))
        .ok_or(Error::LevelSetNotClosed)?;
    let (mut r, pad) = (Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), 4.0 * cell);
    for v in &outer.vertices {
        r = Rect::new(r.xmin.min(v.x), r.xmax.max(v.x), r.ymin.min(v.y), r.ymax.max(v.y));
    }
    let r = Rect::new(r.xmin - pad, r.xmax + pad, r.ymin - pad, r.ymax + pad);
    let fine = cell.min(r.diameter() / 256.0);
    let inside = extract_level(u, 0.0, &Domain::rect(r), fine)?;
    if inside.len() != 1 || !inside[0].closed {
        return Err(Error::LevelSetNotClosed);
    }
    Ok(r)
}

fn component_domain(p: Poly2, search: Rect) -> Result<(Poly2, Domain)> {
    let u = ScalarField::Poly(p.clone());
    let rect = bounded_component(&u, search, search.diameter() / 1024.0)?;
    Ok((p, Domain::with_level(rect, u)))
}

/// `ᾱ - (y²/2 + x⁴ - 6x²y² + y⁴)` on the component of `{u > 0}` about the
/// origin. Solves `-Δu = 1`.
pub fn example_quartic(alpha: &Rational) -> Result<(Poly2, Domain)> {
    if *alpha <= rat(0, 1) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    let p = Poly2::from_terms([
        (0, 0, alpha.clone()),
        (0, 2, rat(-1, 2)),
        (4, 0, rat(-1, 1)),
        (2, 2, rat(6, 1)),
        (0, 4, rat(-1, 1)),
    ]);
    component_domain(p, Rect::new(-1.0, 1.0, -1.0, 1.0))
}

/// `c - (y²/2 + x³ - 3xy² + A(x⁴ - 6x²y² + y⁴))`, critical at the origin
/// and at `(-3/(4A), 0)`. Solves `-Δu = 1`.
pub fn example_star_shaped(a: &Rational, c: &Rational) -> Result<(Poly2, Domain)> {
    if *a <= rat(35, 2) {
        return Err(Error::InvalidArgument("A must exceed 35/2".into()));
    }
    let p = Poly2::from_terms([
        (0, 0, c.clone()),
        (0, 2, rat(-1, 2)),
        (3, 0, rat(-1, 1)),
        (1, 2, rat(3, 1)),
        (4, 0, -a.clone()),
        (2, 2, a.clone() * rat(6, 1)),
        (0, 4, -a.clone()),
    ]);
    component_domain(p, Rect::new(-0.5, 0.5, -0.5, 0.5))
}

/// `J₀(r)` with `r` the distance to `(0, P)`, `P` the first zero of `J₁`.
/// Solves `-Δu = u`; the origin lies on the circle `r = P` of minima.
pub fn example_radial_bessel() -> ScalarField {
    let p = j1_first_zero();
    let e = Expr::parse(&format!("(j0 (dist 0 {p:.17e}))")).expect("valid expression");
    FieldExpr::with_bounds(e, Rect::new(-1.0, 1.0, -1.0, 1.0)).into()
}

/// `a Re(zⁿ) + b Im(zⁿ)`; harmonic, with index `1 - n` at the origin.
pub fn example_harmonic(n: u32, a: &Rational, b: &Rational) -> Result<Poly2> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    if *a == rat(0, 1) && *b == rat(0, 1) {
        return Err(Error::ZeroMix);
    }
    let re = Poly2::harmonic_basis(n, HarmonicPart::Real)?;
    let im = Poly2::harmonic_basis(n, HarmonicPart::Imaginary)?;
    Ok(&re.scale(a) + &im.scale(b))
}

/// `cos y`, solving `-Δu = u`, with the line `y = 0` of maxima.
pub fn example_cosine() -> ScalarField {
    FieldExpr::new(Expr::parse("(cos y)").expect("valid expression")).into()
}

/// Ray test from the origin: along each of `rays` directions the domain is
/// entered once and never re-entered.
pub fn star_shaped(domain: &Domain, rays: usize, step: f64) -> bool {
    let r = domain.rect;
    let reach = r.diameter();
    (0..rays).all(|k| {
        let t = TAU * k as f64 / rays as f64;
        let (c, s) = (t.cos(), t.sin());
        let mut left = false;
        let mut d = 0.0;
        while d <= reach {
            let inside = domain.contains(Point::new(d * c, d * s));
            if inside && left {
                return false;
            }
            left |= !inside;
            d += step;
        }
        left
    })
}

// ---------------------------------------------------------------------------
// cases

/// Runs a registered case.
pub fn run_replication(id: &str) -> Result<ReplicationCase> {
    match id {
        "example-4.1" => Ok(case_quartic(&rat(1, 200))),
        "example-4.2" => Ok(case_star_shaped(&rat(18, 1), &rat(1, 10000))),
        "radial-bessel" => Ok(case_bessel()),
        "cosine" => Ok(case_cosine()),
        "harmonic" => Ok(case_harmonic()),
        _ => Err(Error::UnknownCase(id.into())),
    }
}

fn finish(id: &str, description: String, fields: Vec<String>, f: &Nonlinearity, facts: Facts, reports: Vec<CriticalPointReport>) -> ReplicationCase {
    let passed = facts.0.iter().all(|f| f.passed);
    ReplicationCase {
        id: id.into(),
        description,
        fields,
        f: f.source().into(),
        facts: facts.0,
        passed,
        critical_points: reports,
    }
}

fn analysis_of(u: &ScalarField, domain: &Domain, f: &Nonlinearity) -> Result<Analysis> {
    analyze(u, domain, Some(f), domain.rect.diameter() / 128.0, &Tolerances::default())
}

fn morse_index(domain: &Domain, f: &Nonlinearity, h: f64) -> Result<usize> {
    let cfg = SolveConfig::new(domain.clone(), h, f.clone());
    Ok(solve_dirichlet(&cfg, None)?.spectrum(1)?.morse_index)
}

fn case_quartic(alpha: &Rational) -> ReplicationCase {
    use Basis::*;
    let f = Nonlinearity::constant(1.0);
    let mut facts = Facts::default();
    let a = rat_to_f64(alpha);
    let desc = format!("quartic degenerate maximum, alpha = {alpha}");
    let (p, dom) = match example_quartic(alpha) {
        Ok(v) => v,
        Err(e) => {
            facts.flag("domain is a closed curve", Err(e), IndependentOracle);
            return finish("example-4.1", desc, vec![], &f, facts, vec![]);
        }
    };
    let u = ScalarField::Poly(p.clone());
    let j = jet_exact(&p, Point::ORIGIN, 4);
    facts.exact("u_yy(0,0)", -1.0, Ok(j.coeff(0, 2)), IndependentOracle);
    facts.exact("u_xxxx(0,0)", -24.0, Ok(j.coeff(4, 0)), IndependentOracle);
    let half = extract_level(&u, a / 2.0, &dom, dom.rect.diameter() / 512.0)
        .map(|c| if c.len() == 1 && c[0].closed { 1.0 } else { 0.0 });
    facts.exact("closed curves at level alpha/2", 1.0, half, Published);
    facts.within("curvature at (0, -1/10)", -1.2 / 1.04, curvature_at(&u, Point::new(0.0, -0.1)), 1e-12, IndependentOracle);

    let analysis = analysis_of(&u, &dom, &f);
    let mut reports = vec![];
    match analysis {
        Ok(an) => {
            facts.exact("verified solution", 1.0, Ok(an.verified_solution as u8 as f64), Elementary);
            facts.exact("critical points", 1.0, Ok(an.critical_points.len() as f64), Published);
            let r = an.critical_points.first();
            facts.exact("critical point distance to origin", 0.0, opt(r, "point").map(|r| r.point.location.dist(Point::ORIGIN)), Published);
            facts.flag("degenerate maximum", opt(r, "point").map(|r| r.class == PointClass::DegenerateMax), Published);
            facts.exact("index", 1.0, opt(r.and_then(|r| r.index), "index").map(|i| i.value as f64), Published);
            facts.exact("n", 4.0, opt(r.and_then(|r| r.n), "n").map(|n| n as f64), IndependentOracle);
            facts.exact(
                "max chain residual",
                0.0,
                opt(r, "point").map(|r| r.chain_residuals.iter().fold(0.0f64, |m, v| m.max(*v))),
                IndependentOracle,
            );
            facts.exact("theorem violations", 0.0, Ok(an.violations() as f64), Published);
            reports = an.critical_points;
        }
        Err(e) => facts.flag("analysis", Err(e), Elementary),
    }
    for k in [1, 3, 5, 7, 9] {
        let c = a * k as f64 / 10.0;
        let kmin = extract_level(&u, c, &dom, dom.rect.diameter() / 512.0).and_then(|curves| {
            curves.iter().map(|cv| min_curvature_on_curve(&u, cv).map(|m| m.1)).try_fold(f64::INFINITY, |m, k| Ok(m.min(k?)))
        });
        facts.push(&format!("min curvature at level {k}/10 alpha"), 0.0, kmin, Comparison::AtMost, 0.0, Published);
    }
    facts.exact("morse index at h = 1/128", 0.0, morse_index(&dom, &f, 1.0 / 128.0).map(|m| m as f64), Published);
    finish("example-4.1", desc, vec![write_field(&u)], &f, facts, reports)
}

fn case_star_shaped(a: &Rational, c: &Rational) -> ReplicationCase {
    use Basis::*;
    let f = Nonlinearity::constant(1.0);
    let mut facts = Facts::default();
    let desc = format!("star-shaped domain with a maximum and a degenerate saddle, A = {a}, c = {c}");
    let (p, dom) = match example_star_shaped(a, c) {
        Ok(v) => v,
        Err(e) => {
            facts.flag("domain is a closed curve", Err(e), Published);
            return finish("example-4.2", desc, vec![], &f, facts, vec![]);
        }
    };
    let u = ScalarField::Poly(p.clone());
    let p1 = Point::new(-0.75 / rat_to_f64(a), 0.0);
    let cell = dom.rect.diameter() / 512.0;
    facts.flag("star-shaped about the origin, 360 rays", Ok(star_shaped(&dom, 360, cell / 4.0)), Published);

    let mut reports = vec![];
    match analysis_of(&u, &dom, &f) {
        Ok(an) => {
            facts.exact("verified solution", 1.0, Ok(an.verified_solution as u8 as f64), Elementary);
            facts.exact("critical points", 2.0, Ok(an.critical_points.len() as f64), Published);
            let near = |q: Point| an.critical_points.iter().min_by(|x, y| x.point.location.dist(q).total_cmp(&y.point.location.dist(q)));
            let r0 = near(Point::ORIGIN);
            let r1 = near(p1);
            facts.within("P1 distance to (-3/(4A), 0)", 0.0, opt(r1, "P1").map(|r| r.point.location.dist(p1)), 1e-8, Published);
            facts.exact("origin distance", 0.0, opt(r0, "origin").map(|r| r.point.location.dist(Point::ORIGIN)), Published);
            let ev = opt(r1, "P1").map(|r| r.hessian_eigenvalues);
            facts.within("P1 Hessian eigenvalue 1", -0.875, ev.clone().map(|e| e[0]), 1e-12, IndependentOracle);
            facts.within("P1 Hessian eigenvalue 2", -0.125, ev.map(|e| e[1]), 1e-12, IndependentOracle);
            facts.exact("index at origin", 0.0, opt(r0.and_then(|r| r.index), "index").map(|i| i.value as f64), Published);
            facts.exact("index at P1", 1.0, opt(r1.and_then(|r| r.index), "index").map(|i| i.value as f64), Published);
            facts.flag("origin is a degenerate saddle", opt(r0, "origin").map(|r| r.class == PointClass::DegenerateSaddle), Published);
            facts.flag("P1 is a maximum", opt(r1, "P1").map(|r| r.class.is_max()), Published);
            facts.exact("theorem violations", 0.0, Ok(an.violations() as f64), Published);
            let sum: Result<f64> = an.critical_points.iter().map(|r| opt(r.index, "index").map(|i| i.value as f64)).sum();
            facts.exact("index sum", 1.0, sum, Elementary);
            reports = an.critical_points;
        }
        Err(e) => facts.flag("analysis", Err(e), Elementary),
    }
    let degree = extract_level(&u, rat_to_f64(c) / 2.0, &dom, cell).and_then(|curves| {
        let enclosing = curves
            .into_iter()
            .find(|cv| cv.closed && cv.encloses(Point::ORIGIN) && cv.encloses(p1))
            .ok_or_else(|| missing("closed level curve around both points"))?;
        boundary_degree(&u, &enclosing).map(|d| d as f64)
    });
    facts.exact("gradient degree on level c/2", 1.0, degree, Elementary);
    facts.exact("morse index", 0.0, morse_index(&dom, &f, dom.rect.diameter() / 128.0).map(|m| m as f64), Published);
    finish("example-4.2", desc, vec![write_field(&u)], &f, facts, reports)
}

fn case_bessel() -> ReplicationCase {
    use Basis::*;
    let f = Nonlinearity::identity();
    let u = example_radial_bessel();
    let mut facts = Facts::default();
    let big_p = j1_first_zero();
    // u = g(r), g'' (P) = -J0(P); along the circle r = P + x²/(2P) - ...
    let g2 = -bessel_j(0, big_p);
    let (uyy, uxxy, uxxxx) = (g2, -g2 / big_p, 3.0 * g2 / (big_p * big_p));

    // low-discrepancy sample points in the unit disk
    let worst = (0..20)
        .map(|k| {
            let (s, t) = ((k as f64 * 0.618_033_988_749_894_9).fract(), (k as f64 * 0.754_877_666_246_692_7 + 0.5).fract());
            Point::new(0.9 * s.sqrt() * (TAU * t).cos(), 0.9 * s.sqrt() * (TAU * t).sin())
        })
        .map(|p| u.pde_residual(&f, p).map(f64::abs))
        .try_fold(0.0f64, |m, r| Ok::<_, Error>(m.max(r?)));
    facts.push("max pde residual at 20 points", 1e-10, worst, Comparison::AtMost, 0.0, Elementary);

    let dom = Domain::rect(Rect::new(-0.5, 0.5, -0.5, 0.5));
    let mut reports = vec![];
    match analyze(&u, &dom, Some(&f), 1.0 / 32.0, &Tolerances::default()) {
        Ok(an) => {
            facts.exact("verified solution", 1.0, Ok(an.verified_solution as u8 as f64), Elementary);
            let r = an
                .critical_points
                .iter()
                .min_by(|a, b| a.point.location.dist(Point::ORIGIN).total_cmp(&b.point.location.dist(Point::ORIGIN)));
            facts.within("origin found", 0.0, opt(r, "origin").map(|r| r.point.location.dist(Point::ORIGIN)), 1e-12, Elementary);
            facts.flag("critical set is a curve near the origin", opt(r, "origin").map(|r| r.point.isolated == Isolation::CurveSuspected), Published);
            facts.flag("non-isolated extremum", opt(r, "origin").map(|r| r.class == PointClass::NonIsolatedExtremum), Published);
            facts.exact("n", 3.0, opt(r.and_then(|r| r.n), "n").map(|n| n as f64), Published);
            facts.exact("l", 4.0, opt(r.and_then(|r| r.l), "l").map(|l| l as f64), Published);
            let jet = opt(r, "origin").map(|r| r.jet.clone());
            facts.within("u_yy", uyy, jet.clone().map(|j| j.coeff(0, 2)), 1e-6, IndependentOracle);
            facts.within("u_xxy", uxxy, jet.clone().map(|j| j.coeff(2, 1)), 1e-6, IndependentOracle);
            facts.within("u_xxxx", uxxxx, jet.clone().map(|j| j.coeff(4, 0)), 1e-6, IndependentOracle);
            let gap = jet.map(|j| {
                let b2 = j.coeff(2, 1).powi(2);
                (b2 - j.coeff(0, 2) * j.coeff(4, 0) / 3.0).abs() / b2
            });
            facts.push("relative equality gap", 1e-6, gap, Comparison::AtMost, 0.0, Published);
            facts.push("reported equality gap", 1e-6 * uxxy * uxxy, opt(r.and_then(|r| r.equality_gap), "gap"), Comparison::AtMost, 0.0, Published);
            if let Some(r) = r {
                let fit = expansion_residual_slope(&u, r, &dyadic_radii(0.25, 6));
                facts.push("expansion remainder slope", 4.5, fit.and_then(|f| opt(f.slope, "slope")), Comparison::AtLeast, 0.0, IndependentOracle);
            }
            facts.exact("theorem violations", 0.0, Ok(an.violations() as f64), Published);
            reports = an.critical_points.into_iter().filter(|r| r.point.location.dist(Point::ORIGIN) < 1e-12).collect();
        }
        Err(e) => facts.flag("analysis", Err(e), Elementary),
    }
    finish("radial-bessel", "Bessel profile with a ring of minima through the origin".into(), vec![write_field(&u)], &f, facts, reports)
}

fn case_cosine() -> ReplicationCase {
    use Basis::*;
    let f = Nonlinearity::identity();
    let u = example_cosine();
    let mut facts = Facts::default();
    let dom = Domain::rect(Rect::new(-0.5, 0.5, -0.5, 0.5));
    let mut reports = vec![];
    match analyze(&u, &dom, Some(&f), 1.0 / 32.0, &Tolerances::default()) {
        Ok(an) => {
            facts.push("max pde residual", 1e-12, Ok(an.gate.map_or(f64::INFINITY, |g| g.max_residual)), Comparison::AtMost, 0.0, Elementary);
            let pts = &an.critical_points;
            facts.push("critical points found", 5.0, Ok(pts.len() as f64), Comparison::AtLeast, 0.0, Published);
            facts.within("max |y| over critical points", 0.0, Ok(pts.iter().fold(0.0f64, |m, r| m.max(r.point.location.y.abs()))), 1e-12, Published);
            facts.flag("all flagged as a curve", Ok(pts.iter().all(|r| r.point.isolated == Isolation::CurveSuspected)), Published);
            facts.flag("all non-isolated extrema", Ok(pts.iter().all(|r| r.class == PointClass::NonIsolatedExtremum)), Published);
            facts.exact("theorem violations", 0.0, Ok(an.violations() as f64), Published);
        }
        Err(e) => facts.flag("analysis", Err(e), Elementary),
    }
    let cp = CriticalPoint { location: Point::ORIGIN, gradient_norm: 0.0, isolated: Isolation::CurveSuspected, neighbor_distance: None };
    let ctx = ClassifyContext { f: Some(&f), verified: true, domain: Some(&dom) };
    match classify_point(&u, &cp, &ctx, &Tolerances::default()) {
        Ok(r) => {
            facts.flag("minimal order exhausted at the origin", Ok(r.n.is_none()), Elementary);
            facts.exact("u_yy", -1.0, Ok(r.u_yy), Elementary);
            let fit = expansion_residual_slope(&u, &r, &dyadic_radii(0.25, 6));
            facts.push("expansion remainder slope", 3.5, fit.and_then(|f| opt(f.slope, "slope")), Comparison::AtLeast, 0.0, Elementary);
            reports.push(r);
        }
        Err(e) => facts.flag("classification at origin", Err(e), Elementary),
    }
    finish("cosine", "cos y and its line of maxima".into(), vec![write_field(&u)], &f, facts, reports)
}

fn case_harmonic() -> ReplicationCase {
    use Basis::*;
    let f = Nonlinearity::constant(0.0);
    let mut facts = Facts::default();
    let mut fields = vec![];
    let mut reports = vec![];
    let dom = Domain::rect(Rect::new(-1.0, 1.0, -1.0, 1.0));
    for n in 2..=6u32 {
        for (a, b) in [(1, 0), (2, 3)] {
            let tag = format!("n = {n}, mix ({a}, {b})");
            let p = match example_harmonic(n, &rat(a, 1), &rat(b, 1)) {
                Ok(p) => p,
                Err(e) => {
                    facts.flag(&tag, Err(e), Elementary);
                    continue;
                }
            };
            let u = ScalarField::Poly(p);
            let basis = if (a, b) == (1, 0) && n >= 3 { Published } else { IndependentOracle };
            facts.exact(&format!("index, {tag}"), 1.0 - n as f64, robust_index(&u, Point::ORIGIN).map(|i| i.value as f64), basis);
            let ctx = ClassifyContext { f: Some(&f), verified: true, domain: Some(&dom) };
            let r = CriticalPoint::at(&u, Point::ORIGIN).and_then(|cp| classify_point(&u, &cp, &ctx, &Tolerances::default()));
            match r {
                Ok(r) => {
                    if n >= 3 {
                        facts.exact(&format!("u_yy, {tag}"), 0.0, Ok(r.u_yy), basis);
                        facts.exact(&format!("n, {tag}"), n as f64, opt(r.n, "n").map(|v| v as f64), Elementary);
                        facts.exact(&format!("max chain residual, {tag}"), 0.0, Ok(r.chain_residuals.iter().fold(0.0f64, |m, v| m.max(*v))), Elementary);
                        facts.flag(&format!("degenerate saddle, {tag}"), Ok(r.class == PointClass::DegenerateSaddle), Elementary);
                    } else {
                        facts.flag(&format!("nondegenerate saddle, {tag}"), Ok(r.class == PointClass::NondegenerateSaddle), Elementary);
                    }
                    facts.exact(&format!("violations, {tag}"), 0.0, Ok(r.theorem_violations.len() as f64), Published);
                    reports.push(r);
                }
                Err(e) => facts.flag(&tag, Err(e), Elementary),
            }
            fields.push(write_field(&u));
        }
    }
    finish("harmonic", "a Re(z^n) + b Im(z^n), n = 2..6".into(), fields, &f, facts, reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_case() {
        assert_eq!(run_replication("nope"), Err(Error::UnknownCase("nope".into())));
    }

    #[test]
    fn zero_mix_rejected() {
        assert_eq!(example_harmonic(3, &rat(0, 1), &rat(0, 1)), Err(Error::ZeroMix));
    }

    #[test]
    fn quartic_domain_is_bounded() {
        let (_, d) = example_quartic(&rat(1, 200)).unwrap();
        assert!(d.rect.xmax < 0.3 && d.rect.ymax < 0.13, "{:?}", d.rect);
        assert!(star_shaped(&d, 90, 1e-3));
    }

    #[test]
    fn ray_test_rejects_an_annulus() {
        // (r² - 1/16)(1/4 - r²) > 0
        let inner = Poly2::from_terms([(0, 0, rat(-1, 16)), (2, 0, rat(1, 1)), (0, 2, rat(1, 1))]);
        let outer = Poly2::from_terms([(0, 0, rat(1, 4)), (2, 0, rat(-1, 1)), (0, 2, rat(-1, 1))]);
        let d = Domain::with_level(Rect::new(-1.0, 1.0, -1.0, 1.0), ScalarField::Poly(&inner * &outer));
        assert!(!star_shaped(&d, 8, 0.01));
    }
}
