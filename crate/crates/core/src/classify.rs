//! Critical points: location, degeneracy, and the structure of degenerate
//! extrema and saddles of solutions of `-Δu = f(u)`.
//!
//! Every sign condition the structure theory predicts is checked, and a
//! failed check is recorded by name in `theorem_violations`. Violations are
//! data: on fields that are not solutions they are expected. Whether a field
//! is a solution is decided by a sampled PDE residual gate.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{factorial, Domain, GridField, NodeKind, Nonlinearity, Point, Rational, ScalarField};
use crate::index::{max_radius, robust_index_from, IndexResult};
use crate::jets::{
    first_pure_x_order_l, jet, jet_exact, minimal_order_n, rotate_to_normal_form, snap_critical, NormalForm,
    TaylorJet,
};

/// Tolerances of the analysis pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Newton on `∇u = 0` stops when `|∇u| <= gradient * (gradient scale)`.
    pub gradient: f64,
    /// PDE residual gate, relative to the field scale.
    pub residual: f64,
    /// Dedup radius as a fraction of the seed spacing.
    pub merge_fraction: f64,
    /// Jet order for closed-form and grid fields.
    pub jet_order: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { gradient: 1e-9, residual: 1e-6, merge_fraction: 0.5, jet_order: 6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Isolation {
    Isolated,
    /// Other zeros nearby, but no curve through them.
    Cluster,
    /// At least five nearby zeros lying on a line or circle.
    CurveSuspected,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub location: Point,
    pub gradient_norm: f64,
    pub isolated: Isolation,
    /// Distance to the nearest other reported zero.
    pub neighbor_distance: Option<f64>,
}

impl CriticalPoint {
    /// A point assumed isolated, for classifying a known location.
    pub fn at(u: &ScalarField, p: Point) -> Result<Self> {
        let g = u.gradient(p)?;
        Ok(CriticalPoint { location: p, gradient_norm: g[0].hypot(g[1]), isolated: Isolation::Isolated, neighbor_distance: None })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    NondegenerateMax,
    NondegenerateMin,
    NondegenerateSaddle,
    DegenerateMax,
    DegenerateMin,
    DegenerateSaddle,
    NonIsolatedExtremum,
    Unclassified,
}

impl PointClass {
    pub fn is_max(self) -> bool {
        matches!(self, PointClass::NondegenerateMax | PointClass::DegenerateMax)
    }

    pub fn is_min(self) -> bool {
        matches!(self, PointClass::NondegenerateMin | PointClass::DegenerateMin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// Which identities among the order-`n` coefficients apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainCase {
    /// `u_yy = 0`: the full alternating chains.
    KernelDegenerate,
    /// `u_yy ≠ 0`: chains truncated to `h <= [(n-1)/2]` for α and `h <= [(n-2)/2]` for β.
    UyyNonzero,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPointReport {
    pub point: CriticalPoint,
    pub hessian_eigenvalues: [f64; 2],
    pub class: PointClass,
    /// Angle of the normal-form x-axis.
    pub rotation_angle: f64,
    /// `u_yy` in the normal form.
    pub u_yy: f64,
    pub n: Option<usize>,
    pub parity: Option<Parity>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub l: Option<usize>,
    pub pure_x_coefficient: Option<f64>,
    pub index: Option<IndexResult>,
    pub inequality_slack: Option<f64>,
    pub equality_gap: Option<f64>,
    pub chain_residuals: Vec<f64>,
    pub expansion_residual_slope: Option<f64>,
    pub theorem_violations: Vec<String>,
    pub degenerate: bool,
    /// Both Hessian eigenvalues vanish; every frame is then a normal form.
    pub hessian_zero: bool,
    /// Jet in the normal-form frame.
    pub jet: TaylorJet,
    pub notes: Vec<String>,
}

impl CriticalPointReport {
    /// Sign of `u_yy`, of α (0 when it vanishes) and whether β is nonzero.
    ///
    /// With a vanishing Hessian the frame is free, so the pattern is read in
    /// the direction that maximizes `∂ⁿu/∂θⁿ`, where β vanishes. This keeps it
    /// invariant under rotations of the field.
    pub fn sign_pattern(&self) -> (i8, i8, bool) {
        let s = |v: f64, zero: bool| if zero { 0 } else if v > 0.0 { 1 } else { -1 };
        if let (true, Some(n)) = (self.hessian_zero, self.n) {
            let top = max_directional(&self.jet, n);
            let zero = top.abs() <= 1e-9 * self.jet.order_scale(n) || top.abs() <= 10.0 * self.jet.err(n, 0);
            return (0, s(top, zero), false);
        }
        let alpha_zero = self.n.map_or(true, |n| self.jet.is_zero(n, 0));
        let beta_zero = self.n.map_or(true, |n| self.jet.is_zero(n - 1, 1));
        (s(self.u_yy, self.jet.is_zero(0, 2)), s(self.alpha.unwrap_or(0.0), alpha_zero), !beta_zero)
    }
}

/// `max_θ ∂ⁿu/∂θⁿ` over unit directions, from the order-`n` coefficients.
fn max_directional(j: &TaylorJet, n: usize) -> f64 {
    let d = |t: f64| {
        let (c, s) = (t.cos(), t.sin());
        (0..=n).map(|k| binom(n, k) * c.powi((n - k) as i32) * s.powi(k as i32) * j.coeff(n - k, k)).sum::<f64>()
    };
    let m = 720;
    let step = std::f64::consts::TAU / m as f64;
    let k = (0..m).max_by(|a, b| d(*a as f64 * step).total_cmp(&d(*b as f64 * step))).unwrap_or(0);
    // golden-section refinement on the bracketing cells
    let (mut a, mut b) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if d(x1) < d(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    d(0.5 * (a + b)).max(d(k as f64 * step))
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

// ---------------------------------------------------------------------------
// locating critical points

fn sym_solve(h: [f64; 3], g: [f64; 2]) -> [f64; 2] {
    // pseudo-inverse of the symmetric Hessian, small eigenvalues cut off
    let [a, b, c] = h;
    let m = 0.5 * (a + c);
    let d = (0.5 * (a - c)).hypot(b);
    let (l1, l2) = (m - d, m + d);
    let big = l1.abs().max(l2.abs());
    if big == 0.0 {
        return [0.0, 0.0];
    }
    let t = 0.5 * (2.0 * b).atan2(a - c);
    let (e2, e1) = ([t.cos(), t.sin()], [-t.sin(), t.cos()]);
    let mut out = [0.0, 0.0];
    for (l, e) in [(l1, e1), (l2, e2)] {
        if l.abs() > 1e-14 * big {
            let w = (e[0] * g[0] + e[1] * g[1]) / l;
            out[0] += w * e[0];
            out[1] += w * e[1];
        }
    }
    out
}

/// Newton on `∇u = 0` with a step cap and backtracking; degenerate zeros
/// converge linearly, so iterations continue until the step stalls.
fn newton_zero(u: &ScalarField, domain: &Domain, start: Point, cap: f64) -> Option<(Point, f64)> {
    let ok = |p: Point| domain.contains(p) && u.contains(p);
    let gnorm = |p: Point| u.gradient(p).ok().map(|g| g[0].hypot(g[1]));
    let mut p = start;
    let mut gn = gnorm(p)?;
    for _ in 0..600 {
        if gn == 0.0 {
            break;
        }
        let d = u.derivs(p, 2).ok()?;
        let mut step = sym_solve(d.hessian(), d.gradient());
        let len = step[0].hypot(step[1]);
        if len == 0.0 {
            break;
        }
        if len > cap {
            step = [step[0] * cap / len, step[1] * cap / len];
        }
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let q = Point::new(p.x - lambda * step[0], p.y - lambda * step[1]);
            if ok(q) {
                if let Some(gq) = gnorm(q) {
                    if gq < gn {
                        p = q;
                        gn = gq;
                        moved = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !moved || lambda * len <= 1e-16 * (1.0 + p.x.abs().max(p.y.abs())) {
            break;
        }
    }
    Some((p, gn))
}

/// Zeros of `∇u` inside `domain`, started from every lattice node where
/// `|∇u|` is a discrete local minimum, or is small and a minimum along some
/// lattice direction.
pub fn find_critical_points(u: &ScalarField, domain: &Domain, spacing: f64, tol: &Tolerances) -> Result<Vec<CriticalPoint>> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument("seed spacing must be positive".into()));
    }
    let r = domain.rect;
    let nx = ((r.xmax - r.xmin) / spacing).round().max(1.0) as usize + 1;
    let ny = ((r.ymax - r.ymin) / spacing).round().max(1.0) as usize + 1;
    let (hx, hy) = ((r.xmax - r.xmin) / (nx - 1) as f64, (r.ymax - r.ymin) / (ny - 1) as f64);
    let at = |i: usize, j: usize| Point::new(r.xmin + i as f64 * hx, r.ymin + j as f64 * hy);
    let mut norms = vec![f64::NAN; nx * ny];
    let mut gscale = 0.0f64;
    let mut any = false;
    for j in 0..ny {
        for i in 0..nx {
            let p = at(i, j);
            if domain.contains(p) && u.contains(p) {
                if let Ok(g) = u.gradient(p) {
                    let n = g[0].hypot(g[1]);
                    norms[j * nx + i] = n;
                    gscale = gscale.max(n);
                    any = true;
                }
            }
        }
    }
    if !any {
        return Err(Error::DomainEmpty);
    }
    let gtol = tol.gradient * gscale.max(1e-300);
    let merge = tol.merge_fraction * spacing;
    let cap = 2.0 * spacing;
    let mut found: Vec<(Point, f64)> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let v = norms[j * nx + i];
            if v.is_nan() {
                continue;
            }
            // a minimum along some lattice direction: along a curve of zeros
            // no node is a 2D minimum, but every node next to it is a 1D one
            let at_norm = |di: i64, dj: i64| {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                    f64::NAN
                } else {
                    norms[b as usize * nx + a as usize]
                }
            };
            let dirs = [(1, 0), (0, 1), (1, 1), (1, -1)];
            let min_along = |&(di, dj): &(i64, i64)| !(at_norm(di, dj) < v) && !(at_norm(-di, -dj) < v);
            let is_min = dirs.iter().all(min_along) || v <= 0.05 * gscale && dirs.iter().any(min_along);
            if !is_min {
                continue;
            }
            if let Some((mut p, mut gn)) = newton_zero(u, domain, at(i, j), cap) {
                if gn > gtol {
                    continue;
                }
                // next to the boundary a grid interpolates Dirichlet values
                // stored off the true boundary; zeros there are artifacts
                if let ScalarField::Grid(g) = u {
                    if !g.in_interior_cell(p.x, p.y) {
                        continue;
                    }
                }
                if let Some(poly) = u.as_poly() {
                    if let Some((x, y)) = snap_critical(poly, p) {
                        p = Point::new(crate::field::rat_to_f64(&x), crate::field::rat_to_f64(&y));
                        gn = 0.0;
                    }
                }
                found.push((p, gn));
            }
        }
    }
    // dedup, keeping the smallest gradient of each group
    found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.x.total_cmp(&b.0.x)).then(a.0.y.total_cmp(&b.0.y)));
    let mut kept: Vec<(Point, f64)> = Vec::new();
    for (p, g) in found {
        if kept.iter().all(|(q, _)| q.dist(p) >= merge) {
            kept.push((p, g));
        }
    }
    kept.sort_by(|a, b| a.0.x.total_cmp(&b.0.x).then(a.0.y.total_cmp(&b.0.y)));
    let pts: Vec<Point> = kept.iter().map(|k| k.0).collect();
    Ok(kept
        .iter()
        .map(|&(p, g)| {
            let near: Vec<Point> = pts.iter().copied().filter(|q| q.dist(p) <= 10.0 * merge).collect();
            let isolated = if near.len() >= 5 && fits_curve(&near, merge) {
                Isolation::CurveSuspected
            } else if near.len() >= 2 {
                Isolation::Cluster
            } else {
                Isolation::Isolated
            };
            let neighbor_distance =
                pts.iter().filter(|q| **q != p).map(|q| q.dist(p)).min_by(f64::total_cmp);
            CriticalPoint { location: p, gradient_norm: g, isolated, neighbor_distance }
        })
        .collect())
}

/// Whether the points lie on a line or a circle to within `tol`.
fn fits_curve(pts: &[Point], tol: f64) -> bool {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x / n, b + p.y / n));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.x - mx, p.y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // line through the centroid along the principal direction
    let t = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (nx, ny) = (-t.sin(), t.cos());
    let line = pts.iter().map(|p| ((p.x - mx) * nx + (p.y - my) * ny).abs()).fold(0.0, f64::max);
    if line < tol {
        return true;
    }
    // algebraic circle fit x^2 + y^2 + D x + E y + F = 0 in centered coordinates
    let mut m = nalgebra::Matrix3::<f64>::zeros();
    let mut rhs = nalgebra::Vector3::<f64>::zeros();
    for p in pts {
        let (x, y) = (p.x - mx, p.y - my);
        let row = nalgebra::Vector3::new(x, y, 1.0);
        m += row * row.transpose();
        rhs += row * -(x * x + y * y);
    }
    let Some(sol) = m.lu().solve(&rhs) else { return false };
    let (cx, cy) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = cx * cx + cy * cy - sol[2];
    if !(r2 > 0.0) {
        return false;
    }
    let r = r2.sqrt();
    pts.iter().map(|p| ((p.x - mx - cx).hypot(p.y - my - cy) - r).abs()).fold(0.0, f64::max) < tol
}

// ---------------------------------------------------------------------------
// identities

/// Residuals of the alternating identities among the order-`n` coefficients
/// of a normal-form jet: `|c(n-2h, 2h) - (-1)^h α|` then
/// `|c(n-2h-1, 2h+1) - (-1)^h β|`, over the ranges of `case`.
pub fn check_harmonic_chain(j: &TaylorJet, n: usize, case: ChainCase) -> Result<Vec<f64>> {
    if j.order() < n {
        return Err(Error::JetOrderTooSmall { needed: n, have: j.order() });
    }
    let (ha, hb) = match case {
        ChainCase::KernelDegenerate => (n / 2, (n - 1) / 2),
        ChainCase::UyyNonzero => ((n - 1) / 2, (n - 2) / 2),
    };
    let sign = |h: usize| if h % 2 == 0 { 1.0 } else { -1.0 };
    let residual = |a: usize, b: usize, h: usize, base: (usize, usize)| -> f64 {
        match (j.exact_coeff(a, b), j.exact_coeff(base.0, base.1)) {
            (Some(c), Some(r)) => {
                let s: Rational = if h % 2 == 0 { r } else { -r };
                crate::field::rat_to_f64(&(c - s)).abs()
            }
            _ => (j.coeff(a, b) - sign(h) * j.coeff(base.0, base.1)).abs(),
        }
    };
    let mut out = Vec::new();
    for h in 1..=ha {
        out.push(residual(n - 2 * h, 2 * h, h, (n, 0)));
    }
    for h in 1..=hb {
        out.push(residual(n - 2 * h - 1, 2 * h + 1, h, (n - 1, 1)));
    }
    Ok(out)
}

/// Error bound paired with each chain residual: ten times the combined jet
/// error of the two coefficients compared.
pub fn chain_tolerances(j: &TaylorJet, n: usize, case: ChainCase) -> Vec<f64> {
    let (ha, hb) = match case {
        ChainCase::KernelDegenerate => (n / 2, (n - 1) / 2),
        ChainCase::UyyNonzero => ((n - 1) / 2, (n - 2) / 2),
    };
    let mut out = Vec::new();
    for h in 1..=ha {
        out.push(10.0 * (j.err(n - 2 * h, 2 * h) + j.err(n, 0)));
    }
    for h in 1..=hb {
        out.push(10.0 * (j.err(n - 2 * h - 1, 2 * h + 1) + j.err(n - 1, 1)));
    }
    out
}

/// `2((n-1)!)^2/(2n-2)! · u_yy · c_{2n-2} - β^2`, nonnegative at degenerate
/// extrema with `l = 2n - 2` and zero on curves of extrema.
pub fn check_inequality_slack(u_yy: f64, beta: f64, coeff_2n2: f64, n: usize) -> Result<f64> {
    if n % 2 == 0 {
        return Err(Error::WrongParity(n));
    }
    let k = 2.0 * factorial(n - 1).powi(2) / factorial(2 * n - 2);
    Ok(k * u_yy * coeff_2n2 - beta * beta)
}

// ---------------------------------------------------------------------------
// expansion remainder

/// Residual of the normal-form model along quasi-homogeneous curves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionFit {
    /// Fitted exponent of `max |u - M|` against `t`; absent when exact.
    pub slope: Option<f64>,
    /// `(t, max |u - M|)` per radius.
    pub residuals: Vec<(f64, f64)>,
    pub exact: bool,
    /// Exponent of the anisotropic scaling `(t, t^q)`.
    pub q: f64,
    /// The slope the model must reach.
    pub required: f64,
}

impl ExpansionFit {
    pub fn passes(&self) -> bool {
        self.exact || self.slope.is_some_and(|s| s >= self.required)
    }
}

/// Measures `u - M` where `M = u(p) + ½u_yy y² + (α/n!)Re zⁿ + (β/n!)Im zⁿ`
/// (plus `(c_l/l!) x^l` when `l` is known), in the normal-form frame, on
/// the curves `(t cos φ, t^q sin φ)` with `q = n/2` (or `l/2`): along them
/// every term of the model has size `t^n` (or `t^l`) while everything left
/// out is of higher order. At nondegenerate points, and where `n` is
/// unknown, the model is the quadratic Taylor polynomial and `q = 1`.
pub fn expansion_residual_slope(u: &ScalarField, rpt: &CriticalPointReport, radii: &[f64]) -> Result<ExpansionFit> {
    if radii.len() < 2 {
        return Err(Error::InsufficientGrids(radii.len()));
    }
    let p = rpt.point.location;
    let j = &rpt.jet;
    let u0 = u.eval(p)?;
    let (c, s) = (rpt.rotation_angle.cos(), rpt.rotation_angle.sin());
    let n = rpt.n.filter(|_| rpt.degenerate);
    let top = rpt.l.or(n);
    let q = top.map_or(1.0, |t| t as f64 / 2.0);
    let required = match top {
        Some(t) => t as f64 + 0.5,
        None if rpt.degenerate => 3.5,
        None => 2.5,
    };
    let model = |x: f64, y: f64| -> f64 {
        let mut m = u0 + 0.5 * j.coeff(0, 2) * y * y;
        match n {
            Some(n) => {
                let (re, im) = complex_pow(x, y, n);
                m += (j.coeff(n, 0) * re + j.coeff(n - 1, 1) * im) / factorial(n);
                if let Some(l) = rpt.l {
                    m += j.coeff(l, 0) * x.powi(l as i32) / factorial(l);
                }
            }
            None => {
                m += 0.5 * j.coeff(2, 0) * x * x + j.coeff(1, 1) * x * y;
            }
        }
        m
    };
    let samples = 256;
    let mut residuals = Vec::with_capacity(radii.len());
    for &t in radii {
        let mut worst = 0.0f64;
        for k in 0..samples {
            let phi = TAU * (k as f64 + 0.5) / samples as f64;
            let (x, y) = (t * phi.cos(), t.powf(q) * phi.sin());
            let pt = Point::new(p.x + c * x - s * y, p.y + s * x + c * y);
            if !u.contains(pt) {
                return Err(Error::RadiiOutsideDomain { radius: t });
            }
            worst = worst.max((u.eval(pt)? - model(x, y)).abs());
        }
        residuals.push((t, worst));
    }
    let floor = 64.0 * f64::EPSILON * u0.abs().max(f64::MIN_POSITIVE);
    if residuals.iter().all(|&(_, r)| r <= floor) {
        return Ok(ExpansionFit { slope: None, residuals, exact: true, q, required });
    }
    let pts: Vec<(f64, f64)> = residuals.iter().map(|&(t, r)| (t.ln(), r.max(f64::MIN_POSITIVE).ln())).collect();
    Ok(ExpansionFit { slope: Some(ls_slope(&pts)), residuals, exact: false, q, required })
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}

fn complex_pow(x: f64, y: f64, n: usize) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..n {
        (re, im) = (re * x - im * y, re * y + im * x);
    }
    (re, im)
}

/// Dyadic radii `r0 2^-k`, `k = 0..count`.
pub fn dyadic_radii(r0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| r0 / 2f64.powi(k as i32)).collect()
}

// ---------------------------------------------------------------------------
// classification

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CircleSign {
    NonPositive,
    NonNegative,
    Mixed,
    Flat,
}

fn circle_sign(u: &ScalarField, p: Point, u0: f64, r: f64) -> Result<CircleSign> {
    let m = 128;
    let mut vals = Vec::with_capacity(m);
    for k in 0..m {
        let t = TAU * (k as f64 + 0.25) / m as f64;
        let q = Point::new(p.x + r * t.cos(), p.y + r * t.sin());
        vals.push(u.eval(q)? - u0);
    }
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let z = 1e-10 * scale + 16.0 * f64::EPSILON * u0.abs();
    let neg = vals.iter().any(|&v| v < -z);
    let pos = vals.iter().any(|&v| v > z);
    Ok(match (neg, pos) {
        (true, true) => CircleSign::Mixed,
        (true, false) => CircleSign::NonPositive,
        (false, true) => CircleSign::NonNegative,
        (false, false) => CircleSign::Flat,
    })
}

/// Sampling radius: inside the field, clear of neighbors.
fn probe_radius(u: &ScalarField, cp: &CriticalPoint, domain: Option<&Domain>) -> f64 {
    let mut r = 0.05f64.min(max_radius(u, cp.location));
    if let Some(d) = cp.neighbor_distance {
        r = r.min(0.25 * d);
    }
    let p = cp.location;
    let fits = |r: f64| {
        (0..64).all(|k| {
            let t = TAU * k as f64 / 64.0;
            let q = Point::new(p.x + r * t.cos(), p.y + r * t.sin());
            u.contains(q) && domain.map_or(true, |d| d.contains(q)) && u.eval(q).is_ok()
        })
    };
    for _ in 0..30 {
        if fits(r) {
            break;
        }
        r *= 0.5;
    }
    r
}

/// Jet order used for a field.
fn jet_order(u: &ScalarField, tol: &Tolerances) -> usize {
    match u {
        ScalarField::Poly(p) => tol.jet_order.max(2 * p.degree()).clamp(6, 16),
        ScalarField::Grid(_) => tol.jet_order.min(6),
        ScalarField::Expr(_) => tol.jet_order,
    }
}

/// A few Newton steps on the gradient of the jet itself. On grids the zero
/// of the interpolant and the zero of the difference-quotient jet differ by
/// the interpolation error; the jet's zero is the one its normal form sees.
fn relocate_on_jet(u: &ScalarField, mut p: Point, order: usize) -> Result<(Point, TaylorJet)> {
    let mut j = jet(u, p, order)?;
    let reach = match u {
        ScalarField::Grid(g) => g.hx.max(g.hy),
        _ => 1e-6,
    };
    for _ in 0..4 {
        let step = sym_solve(j.hessian(), j.gradient());
        if step[0].hypot(step[1]) > reach || step == [0.0, 0.0] {
            break;
        }
        let q = Point::new(p.x - step[0], p.y - step[1]);
        if !u.contains(q) {
            break;
        }
        let jq = jet(u, q, order)?;
        if jq.gradient_norm() >= j.gradient_norm() {
            break;
        }
        (p, j) = (q, jq);
    }
    Ok((p, j))
}

/// Context for [`classify_point`] beyond the point itself.
#[derive(Clone, Debug, Default)]
pub struct ClassifyContext<'a> {
    pub f: Option<&'a Nonlinearity>,
    /// Result of the PDE residual gate; theorem checks are enforced only then.
    pub verified: bool,
    pub domain: Option<&'a Domain>,
}

/// Runs the full pipeline at one critical point.
pub fn classify_point(
    u: &ScalarField,
    cp: &CriticalPoint,
    ctx: &ClassifyContext<'_>,
    tol: &Tolerances,
) -> Result<CriticalPointReport> {
    let order = jet_order(u, tol);
    let (p, j) = match u {
        ScalarField::Poly(poly) => (cp.location, jet_exact(poly, cp.location, order)),
        _ => relocate_on_jet(u, cp.location, order)?,
    };
    let moved = CriticalPoint { location: p, ..cp.clone() };
    let cp = &moved;
    let hscale = j.order_scale(2).max(j.order_scale(3)).max(1e-300);
    let gtol = (tol.gradient * hscale).max(10.0 * j.err(1, 0).max(j.err(0, 1))).max(match u {
        // a grid critical point is located on the interpolant, the jet comes
        // from difference quotients; they agree to the interpolation error
        ScalarField::Grid(g) => 1e-3 * hscale * g.hx * g.hx,
        _ => 0.0,
    });
    let nf = rotate_to_normal_form(&j, gtol)?;
    let u_yy = nf.jet.coeff(0, 2);
    let mut rpt = CriticalPointReport {
        point: cp.clone(),
        hessian_eigenvalues: nf.eigenvalues,
        class: PointClass::Unclassified,
        rotation_angle: nf.theta,
        u_yy,
        n: None,
        parity: None,
        alpha: None,
        beta: None,
        l: None,
        pure_x_coefficient: None,
        index: None,
        inequality_slack: None,
        equality_gap: None,
        chain_residuals: Vec::new(),
        expansion_residual_slope: None,
        theorem_violations: Vec::new(),
        degenerate: nf.degenerate,
        hessian_zero: nf.hessian_zero,
        jet: nf.jet.clone(),
        notes: Vec::new(),
    };

    // structural orders
    match minimal_order_n(&nf) {
        Ok(mo) => {
            rpt.n = Some(mo.n);
            rpt.parity = Some(if mo.n % 2 == 0 { Parity::Even } else { Parity::Odd });
            rpt.alpha = Some(mo.alpha);
            rpt.beta = Some(mo.beta);
        }
        Err(e) => rpt.notes.push(e.to_string()),
    }

    // index on isolated points
    if cp.isolated != Isolation::CurveSuspected {
        let mut r_max = max_radius(u, p);
        if let Some(d) = cp.neighbor_distance {
            r_max = r_max.min(0.5 * d);
        }
        match robust_index_from(u, p, r_max) {
            Ok(ix) => rpt.index = Some(ix),
            Err(e) => rpt.notes.push(format!("index: {e}")),
        }
    }

    // max / min / saddle
    let r = probe_radius(u, cp, ctx.domain);
    let u0 = u.eval(p)?;
    if !nf.degenerate {
        let [a, b] = nf.eigenvalues;
        rpt.class = if a < 0.0 && b < 0.0 {
            PointClass::NondegenerateMax
        } else if a > 0.0 && b > 0.0 {
            PointClass::NondegenerateMin
        } else {
            PointClass::NondegenerateSaddle
        };
    } else {
        let signs = [r, r / 2.0, r / 4.0].iter().map(|&s| circle_sign(u, p, u0, s)).collect::<Result<Vec<_>>>()?;
        let all = |c: CircleSign| signs.iter().all(|&s| s == c);
        let curve = cp.isolated == Isolation::CurveSuspected;
        rpt.class = if all(CircleSign::Mixed) {
            PointClass::DegenerateSaddle
        } else if all(CircleSign::NonPositive) {
            if curve { PointClass::NonIsolatedExtremum } else { PointClass::DegenerateMax }
        } else if all(CircleSign::NonNegative) {
            if curve { PointClass::NonIsolatedExtremum } else { PointClass::DegenerateMin }
        } else {
            PointClass::Unclassified
        };
        if curve && rpt.class == PointClass::NonIsolatedExtremum {
            rpt.notes.push(
                if all(CircleSign::NonPositive) { "curve of maxima" } else { "curve of minima" }.into(),
            );
        }
    }

    // pure-x order for odd n at extrema
    let extremum = matches!(
        rpt.class,
        PointClass::DegenerateMax | PointClass::DegenerateMin | PointClass::NonIsolatedExtremum
    );
    if let (Some(n), true) = (rpt.n, extremum) {
        if n % 2 == 1 {
            match first_pure_x_order_l(&nf, n) {
                Ok(pl) => {
                    rpt.l = Some(pl.l);
                    rpt.pure_x_coefficient = Some(pl.coeff);
                    if pl.l == 2 * n - 2 {
                        let slack = check_inequality_slack(u_yy, rpt.beta.unwrap_or(0.0), pl.coeff, n)?;
                        rpt.inequality_slack = Some(slack);
                        if rpt.class == PointClass::NonIsolatedExtremum {
                            rpt.equality_gap = Some(slack.abs());
                        }
                    }
                }
                Err(e) => rpt.notes.push(e.to_string()),
            }
        }
    }

    // chain identities
    let constant_f = ctx.f.is_some_and(Nonlinearity::is_constant);
    if let Some(n) = rpt.n {
        if nf.degenerate || constant_f {
            let case = if nf.jet.is_zero(0, 2) { ChainCase::KernelDegenerate } else { ChainCase::UyyNonzero };
            if let Ok(res) = check_harmonic_chain(&nf.jet, n, case) {
                let bounds = chain_tolerances(&nf.jet, n, case);
                if res.iter().zip(&bounds).any(|(r, b)| r > b) {
                    rpt.theorem_violations.push("chain_identity".into());
                }
                rpt.chain_residuals = res;
            }
        }
    }

    if nf.degenerate && !nf.hessian_zero || nf.jet.is_zero(0, 2) {
        check_theorems(&mut rpt, &nf);
    }

    // expansion remainder
    // the expansion is local to u, not to the critical set, so neighbors
    // on a curve of zeros do not limit the radii
    let radii = dyadic_radii(0.25f64.min(max_radius(u, p)), 6);
    match expansion_residual_slope(u, &rpt, &radii) {
        Ok(fit) if fit.exact => rpt.notes.push("expansion exact".into()),
        Ok(fit) => rpt.expansion_residual_slope = fit.slope,
        Err(e) => rpt.notes.push(format!("expansion: {e}")),
    }

    if !ctx.verified {
        // assertions only bind on solutions
        rpt.notes.extend(rpt.theorem_violations.drain(..).map(|v| format!("unverified: {v}")));
    }
    Ok(rpt)
}

/// Sign conditions of the degenerate theory, recorded by name.
fn check_theorems(rpt: &mut CriticalPointReport, nf: &NormalForm) {
    let j = &nf.jet;
    let mut v = Vec::new();
    let uyy_zero = j.is_zero(0, 2);
    let idx = rpt.index.map(|i| i.value);
    if uyy_zero && idx.is_some_and(|i| i > -2) {
        v.push("degeneracy_gate");
    }
    let (n, alpha) = (rpt.n, rpt.alpha.unwrap_or(0.0));
    let alpha_zero = n.map_or(true, |n| j.is_zero(n, 0));
    let beta_zero = n.map_or(true, |n| j.is_zero(n - 1, 1));
    let sgn = match rpt.class {
        PointClass::DegenerateMax => -1.0,
        PointClass::DegenerateMin => 1.0,
        PointClass::NonIsolatedExtremum if rpt.u_yy > 0.0 => 1.0,
        PointClass::NonIsolatedExtremum => -1.0,
        _ => 0.0,
    };
    if sgn != 0.0 {
        if uyy_zero || rpt.u_yy * sgn <= 0.0 {
            v.push("extremum_uyy_sign");
        }
        match n {
            Some(n) if n % 2 == 0 => {
                if rpt.class == PointClass::NonIsolatedExtremum {
                    v.push("non_isolated_n_even");
                } else if alpha_zero || alpha * sgn <= 0.0 {
                    v.push("even_extremum_alpha_sign");
                }
            }
            Some(n) => {
                if !alpha_zero {
                    v.push("odd_extremum_alpha_nonzero");
                }
                if beta_zero {
                    v.push("odd_extremum_beta_zero");
                }
                match (rpt.l, rpt.pure_x_coefficient) {
                    (Some(_), Some(c)) if c * sgn <= 0.0 => v.push("odd_extremum_pure_x_sign"),
                    (None, _) => v.push("odd_extremum_l_missing"),
                    _ => {}
                }
                if let Some(s) = rpt.inequality_slack {
                    let b2 = rpt.beta.unwrap_or(0.0).powi(2);
                    if s < -1e-9 * b2.max(f64::MIN_POSITIVE) && !rpt.jet.is_exact() || rpt.jet.is_exact() && s < 0.0 {
                        v.push("inequality_slack_negative");
                    }
                }
                if rpt.class == PointClass::NonIsolatedExtremum {
                    if rpt.l != Some(2 * n - 2) {
                        v.push("non_isolated_l");
                    }
                    let b2 = rpt.beta.unwrap_or(0.0).powi(2);
                    if rpt.equality_gap.is_some_and(|g| g > 1e-6 * b2) {
                        v.push("non_isolated_equality");
                    }
                }
            }
            None => {}
        }
    }
    if rpt.class == PointClass::DegenerateSaddle && idx == Some(-1) {
        if let Some(n) = n {
            if n % 2 == 0 && !alpha_zero && (alpha.signum() * rpt.u_yy.signum() != -1.0 || uyy_zero) {
                v.push("saddle_sign_law");
            }
            if n % 2 == 1 && !alpha_zero {
                v.push("saddle_odd_alpha");
            }
        }
    }
    if idx.is_some_and(|i| i >= -1) && uyy_zero {
        // stated separately so a report names both directions of the gate
        if !v.contains(&"degeneracy_gate") {
            v.push("degeneracy_gate");
        }
    }
    rpt.theorem_violations.extend(v.into_iter().map(String::from));
}

// ---------------------------------------------------------------------------
// whole-field analysis

/// Sampled PDE residual of a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualGate {
    pub max_residual: f64,
    pub field_scale: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Samples `Δu + f(u)` on a lattice inside the domain. On grids only nodes
/// whose four neighbors are interior are used, where the node-centered
/// Laplacian is the one the solver used.
pub fn pde_residual_gate(u: &ScalarField, f: &Nonlinearity, domain: &Domain, rel_tol: f64) -> Result<ResidualGate> {
    let pts: Vec<Point> = match u {
        ScalarField::Grid(g) => grid_gate_points(g),
        _ => {
            let r = domain.rect;
            let m = 17;
            (0..m * m)
                .map(|k| {
                    let (i, j) = (k % m, k / m);
                    Point::new(
                        r.xmin + (r.xmax - r.xmin) * (i as f64 + 0.5) / m as f64,
                        r.ymin + (r.ymax - r.ymin) * (j as f64 + 0.5) / m as f64,
                    )
                })
                .collect()
        }
    };
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let mut count = 0;
    for p in pts {
        if !(domain.contains(p) && u.contains(p)) {
            continue;
        }
        let res = u.pde_residual(f, p)?;
        scale = scale.max(u.eval(p)?.abs());
        worst = worst.max(res.abs());
        count += 1;
    }
    if count == 0 {
        return Err(Error::DomainEmpty);
    }
    let passed = worst <= rel_tol * scale.max(f64::MIN_POSITIVE) || worst == 0.0;
    Ok(ResidualGate { max_residual: worst, field_scale: scale, samples: count, passed })
}

fn grid_gate_points(g: &GridField) -> Vec<Point> {
    let mut out = Vec::new();
    let stride = ((g.nx * g.ny) as f64 / 4000.0).sqrt().ceil().max(1.0) as usize;
    for j in (1..g.ny - 1).step_by(stride) {
        for i in (1..g.nx - 1).step_by(stride) {
            let ok = [(i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                .iter()
                .all(|&(a, b)| g.kind(a, b) == NodeKind::Interior);
            if ok {
                let (x, y) = g.node(i, j);
                out.push(Point::new(x, y));
            }
        }
    }
    out
}

/// Everything [`analyze`] produces for one field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Analysis {
    pub f: Option<String>,
    pub tolerances: Tolerances,
    pub seed_spacing: f64,
    pub gate: Option<ResidualGate>,
    pub verified_solution: bool,
    pub critical_points: Vec<CriticalPointReport>,
    /// Points the pipeline could not classify, with the reason.
    pub failures: Vec<(Point, String)>,
}

impl Analysis {
    /// Theorem violations on a verified solution.
    pub fn violations(&self) -> usize {
        if !self.verified_solution {
            return 0;
        }
        self.critical_points.iter().map(|r| r.theorem_violations.len()).sum()
    }
}

/// Finds and classifies every critical point of `u` in `domain`.
pub fn analyze(
    u: &ScalarField,
    domain: &Domain,
    f: Option<&Nonlinearity>,
    seed_spacing: f64,
    tol: &Tolerances,
) -> Result<Analysis> {
    let gate = f.map(|f| pde_residual_gate(u, f, domain, tol.residual)).transpose()?;
    let verified = gate.is_some_and(|g| g.passed);
    let points = find_critical_points(u, domain, seed_spacing, tol)?;
    let ctx = ClassifyContext { f, verified, domain: Some(domain) };
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for cp in &points {
        match classify_point(u, cp, &ctx, tol) {
            Ok(r) => reports.push(r),
            Err(e) => failures.push((cp.location, e.to_string())),
        }
    }
    Ok(Analysis {
        f: f.map(|f| f.source().to_string()),
        tolerances: *tol,
        seed_spacing,
        gate,
        verified_solution: verified,
        critical_points: reports,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{rat, rat_int, HarmonicPart, Poly2, Rect};

    fn re(n: u32) -> Poly2 {
        Poly2::harmonic_basis(n, HarmonicPart::Real).unwrap()
    }

    #[test]
    fn chain_on_quartic_harmonic() {
        let j = jet_exact(&re(4), Point::ORIGIN, 4);
        let r = check_harmonic_chain(&j, 4, ChainCase::KernelDegenerate).unwrap();
        assert_eq!(r, vec![0.0, 0.0, 0.0]);
        assert_eq!(check_harmonic_chain(&j, 5, ChainCase::KernelDegenerate), Err(Error::JetOrderTooSmall { needed: 5, have: 4 }));
    }

    #[test]
    fn slack_arithmetic() {
        assert!((check_inequality_slack(-1.0, 1.0, -8.0, 3).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(check_inequality_slack(-1.0, 1.0, -1.0, 3).unwrap() < 0.0);
        assert_eq!(check_inequality_slack(-1.0, 1.0, -1.0, 4), Err(Error::WrongParity(4)));
    }

    #[test]
    fn circle_fit_detects_arcs() {
        let arc: Vec<Point> = (0..6).map(|k| Point::new((0.1 * k as f64).cos(), (0.1 * k as f64).sin())).collect();
        assert!(fits_curve(&arc, 1e-9));
        let blob = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)].map(|(x, y)| Point::new(x, y));
        assert!(!fits_curve(&blob, 0.01));
    }

    #[test]
    fn saddle_of_harmonic_cubic() {
        let u: ScalarField = re(3).into();
        let dom = Domain::rect(Rect::new(-1.0, 1.0, -1.0, 1.0));
        let pts = find_critical_points(&u, &dom, 1.0 / 16.0, &Tolerances::default()).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].location, Point::ORIGIN);
        let ctx = ClassifyContext { f: None, verified: false, domain: Some(&dom) };
        let r = classify_point(&u, &pts[0], &ctx, &Tolerances::default()).unwrap();
        assert_eq!(r.class, PointClass::DegenerateSaddle);
        assert_eq!(r.index.unwrap().value, -2);
        assert_eq!(r.n, Some(3));
        assert_eq!(r.u_yy, 0.0);
    }

    #[test]
    fn quartic_maximum() {
        // 1/200 - (y^2/2 + x^4 - 6x^2y^2 + y^4)
        let p = Poly2::from_terms([
            (0, 0, rat(1, 200)),
            (0, 2, rat(-1, 2)),
            (4, 0, rat_int(-1)),
            (2, 2, rat_int(6)),
            (0, 4, rat_int(-1)),
        ]);
        let u: ScalarField = p.clone().into();
        let dom = Domain::with_level(Rect::new(-0.3, 0.3, -0.12, 0.12), u.clone());
        let f = Nonlinearity::constant(1.0);
        let a = analyze(&u, &dom, Some(&f), 1.0 / 64.0, &Tolerances::default()).unwrap();
        assert!(a.verified_solution);
        assert_eq!(a.critical_points.len(), 1, "{:?} {:?}", a.critical_points, a.failures);
        let r = &a.critical_points[0];
        assert_eq!(r.class, PointClass::DegenerateMax);
        assert_eq!((r.n, r.alpha, r.u_yy), (Some(4), Some(-24.0), -1.0));
        assert_eq!(r.index.unwrap().value, 1);
        assert_eq!(r.chain_residuals, vec![0.0, 0.0]);
        assert!(r.theorem_violations.is_empty(), "{:?}", r.theorem_violations);
        assert!(r.notes.iter().any(|n| n == "expansion exact"), "{:?}", r.notes);
    }
}
