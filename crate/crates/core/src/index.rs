//! Topological index of `∇u` at an isolated zero, by winding number.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Point, ScalarField};
use crate::levelset::LevelCurve;

/// Number of dyadic radii tried by [`robust_index`].
pub const LADDER_STEPS: usize = 20;
const START_SAMPLES: usize = 64;
const MAX_SAMPLES: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IndexResult {
    pub value: i64,
    pub radius: f64,
    pub samples: usize,
    pub min_gradient_norm: f64,
    /// Every angular step of the gradient along the circle stayed below π/2.
    pub certified: bool,
}

/// Principal value of an angle difference in `(-π, π]`.
fn wrap(d: f64) -> f64 {
    let mut d = d % TAU;
    if d > PI {
        d -= TAU;
    } else if d <= -PI {
        d += TAU;
    }
    d
}

fn circle_point(p: Point, r: f64, t: f64) -> Point {
    Point::new(p.x + r * t.cos(), p.y + r * t.sin())
}

/// Winding number of `∇u` on the circle of radius `r` about `p`, starting
/// from `m` samples and doubling until every angular step is below π/2.
pub fn gradient_index(u: &ScalarField, p: Point, r: f64, m: usize) -> Result<IndexResult> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let u0 = u.eval(p)?;
    let mut m = m.max(8);
    loop {
        let mut angles = Vec::with_capacity(m);
        let mut min_norm = f64::INFINITY;
        let mut scale = 0.0f64;
        let mut grads = Vec::with_capacity(m);
        for k in 0..m {
            let q = circle_point(p, r, TAU * k as f64 / m as f64);
            if !u.contains(q) {
                return Err(Error::RadiiOutsideDomain { radius: r });
            }
            let d = u.derivs(q, 1)?;
            scale = scale.max((d.value() - u0).abs());
            let g = d.gradient();
            min_norm = min_norm.min(g[0].hypot(g[1]));
            grads.push(g);
        }
        let tol = 1e-12 * scale / r;
        if min_norm <= tol || min_norm == 0.0 {
            return Err(Error::GradientVanishesOnCircle { radius: r });
        }
        for g in &grads {
            angles.push(g[1].atan2(g[0]));
        }
        let mut total = 0.0;
        let mut certified = true;
        for k in 0..m {
            let d = wrap(angles[(k + 1) % m] - angles[k]);
            if d.abs() >= FRAC_PI_2 {
                certified = false;
            }
            total += d;
        }
        if certified {
            // A zero of ∇u between samples (a curve of critical points
            // crossing the circle) shows up as a V-shaped dip of |∇u| that
            // refinement drives far below the sampled minimum.
            let kmin = (0..m).min_by(|&a, &b| norm(grads[a]).total_cmp(&norm(grads[b]))).unwrap_or(0);
            let step = TAU / m as f64;
            let t0 = TAU * kmin as f64 / m as f64;
            let refined = golden_min(|t| u.gradient(circle_point(p, r, t)).map_or(f64::INFINITY, norm), t0 - step, t0 + step);
            if refined < 1e-6 * min_norm {
                return Err(Error::GradientVanishesOnCircle { radius: r });
            }
            let value = (total / TAU).round() as i64;
            return Ok(IndexResult { value, radius: r, samples: m, min_gradient_norm: min_norm, certified });
        }
        if m >= MAX_SAMPLES {
            return Err(Error::NotCertified { samples: m });
        }
        m *= 2;
    }
}

fn norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

/// Largest radius used by the ladder: half the distance to the domain edge,
/// or `1/2` on unbounded fields.
pub fn max_radius(u: &ScalarField, p: Point) -> f64 {
    match u.bounds() {
        Some(b) => 0.5 * b.inner_distance(p),
        None => 0.5,
    }
}

/// Index on the radius ladder `r_k = 2^-k r_max`, `k <= 20`: the smallest
/// certified radius whose two ladder neighbors give the same value.
pub fn robust_index(u: &ScalarField, p: Point) -> Result<IndexResult> {
    robust_index_from(u, p, max_radius(u, p))
}

pub fn robust_index_from(u: &ScalarField, p: Point, r_max: f64) -> Result<IndexResult> {
    if !(r_max > 0.0) {
        return Err(Error::RadiiOutsideDomain { radius: r_max });
    }
    let mut cache: Vec<Option<Option<IndexResult>>> = vec![None; LADDER_STEPS + 1];
    let mut at = |k: usize| -> Option<IndexResult> {
        if cache[k].is_none() {
            let r = r_max / 2f64.powi(k as i32);
            cache[k] = Some(gradient_index(u, p, r, START_SAMPLES).ok());
        }
        cache[k].unwrap()
    };
    for k in (1..LADDER_STEPS).rev() {
        let Some(mid) = at(k) else { continue };
        let (Some(lo), Some(hi)) = (at(k + 1), at(k - 1)) else { continue };
        if lo.value == mid.value && hi.value == mid.value {
            return Ok(mid);
        }
    }
    Err(Error::NonIsolatedSuspected)
}

/// Winding number of `∇u` along a closed curve, counterclockwise.
///
/// Segments whose gradient turns by π/2 or more are bisected until the
/// rotation is resolved.
pub fn boundary_degree(u: &ScalarField, curve: &LevelCurve) -> Result<i64> {
    let v = &curve.vertices;
    if !curve.closed || v.len() < 4 {
        return Err(Error::InvalidArgument("boundary degree needs a closed curve".into()));
    }
    let mut scale = 0.0f64;
    let mut len = 0.0;
    for w in v.windows(2) {
        len += w[0].dist(w[1]);
    }
    let mut vals = Vec::with_capacity(v.len());
    for q in v {
        vals.push(u.eval(*q)?);
    }
    let vmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scale = scale.max(vmax - vmin).max(vals.iter().map(|x| x.abs()).fold(0.0, f64::max));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE) * v.len() as f64 / len.max(f64::MIN_POSITIVE);
    let grad_angle = |q: Point| -> Result<f64> {
        let g = u.gradient(q)?;
        if g[0].hypot(g[1]) <= tol {
            return Err(Error::GradientVanishesOnCurve);
        }
        Ok(g[1].atan2(g[0]))
    };
    let mut total = 0.0;
    for w in v.windows(2) {
        total += segment_turn(&grad_angle, w[0], w[1], 0)?;
    }
    let area: f64 = v.windows(2).map(|w| w[0].x * w[1].y - w[1].x * w[0].y).sum();
    let value = (total / TAU).round() as i64;
    Ok(if area < 0.0 { -value } else { value })
}

fn segment_turn<F: Fn(Point) -> Result<f64>>(angle: &F, a: Point, b: Point, depth: usize) -> Result<f64> {
    let d = wrap(angle(b)? - angle(a)?);
    if d.abs() < FRAC_PI_2 {
        return Ok(d);
    }
    if depth >= 30 {
        return Err(Error::GradientVanishesOnCurve);
    }
    let m = Point::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
    Ok(segment_turn(angle, a, m, depth + 1)? + segment_turn(angle, m, b, depth + 1)?)
}
