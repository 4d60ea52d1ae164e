//! Level sets, nodal sets of directional derivatives, and level-set curvature.

use std::collections::HashMap;
use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{rat_from_f64, Domain, Point, Poly2, Rect, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// `{u = c}`
    Level,
    /// `{cos θ u_x + sin θ u_y = 0}`
    NodalTheta,
    /// `{u_x = 0}`
    NodalX,
}

/// A traced polyline. Closed curves repeat their first vertex at the end and
/// run counterclockwise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelCurve {
    pub level: f64,
    pub vertices: Vec<Point>,
    pub closed: bool,
    pub kind: CurveKind,
    pub theta: Option<f64>,
}

impl LevelCurve {
    pub fn signed_area(&self) -> f64 {
        0.5 * self.vertices.windows(2).map(|w| w[0].x * w[1].y - w[1].x * w[0].y).sum::<f64>()
    }

    /// Whether `p` lies inside a closed curve (even-odd rule).
    pub fn encloses(&self, p: Point) -> bool {
        if !self.closed {
            return false;
        }
        let mut inside = false;
        for w in self.vertices.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x > p.x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polyline.
    pub fn distance_to(&self, p: Point) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let l2 = dx * dx + dy * dy;
    let t = if l2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / l2).clamp(0.0, 1.0) };
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Zero set of `g` by marching squares over `rect` with square cells.
///
/// `g` returns `None` outside its domain; cells with such a corner are
/// skipped, so curves leaving the domain come back open. Crossings are
/// located on cell edges by bisection, so every vertex is on the zero set to
/// roundoff.
pub fn trace_zero_set<G: Fn(Point) -> Option<f64>>(g: &G, rect: Rect, cell: f64) -> Vec<(Vec<Point>, bool)> {
    let nx = ((rect.xmax - rect.xmin) / cell).ceil() as usize + 1;
    let ny = ((rect.ymax - rect.ymin) / cell).ceil() as usize + 1;
    let node = |i: usize, j: usize| Point::new(rect.xmin + i as f64 * cell, rect.ymin + j as f64 * cell);
    let vals: Vec<Option<f64>> =
        (0..ny).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| g(node(i, j)).filter(|v| v.is_finite())).collect();
    let val = |i: usize, j: usize| vals[j * nx + i];
    let pos = |v: f64| v >= 0.0;

    // edge keys: (i, j, 0) horizontal from (i,j) to (i+1,j); (i, j, 1) vertical to (i,j+1)
    let mut crossing: HashMap<(usize, usize, u8), Point> = HashMap::new();
    let mut edge_point = |i: usize, j: usize, dir: u8| -> Point {
        *crossing.entry((i, j, dir)).or_insert_with(|| {
            let a = node(i, j);
            let b = if dir == 0 { node(i + 1, j) } else { node(i, j + 1) };
            let (va, vb) = (val(i, j).unwrap(), if dir == 0 { val(i + 1, j) } else { val(i, j + 1) }.unwrap());
            bisect_edge(g, a, b, va, vb)
        })
    };

    // segments as pairs of edge keys
    let mut segs: Vec<[(usize, usize, u8); 2]> = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let (Some(v00), Some(v10), Some(v01), Some(v11)) = (val(i, j), val(i + 1, j), val(i, j + 1), val(i + 1, j + 1))
            else {
                continue;
            };
            let bottom = (i, j, 0u8);
            let top = (i, j + 1, 0u8);
            let left = (i, j, 1u8);
            let right = (i + 1, j, 1u8);
            let mut edges = Vec::with_capacity(4);
            if pos(v00) != pos(v10) {
                edges.push(bottom);
            }
            if pos(v10) != pos(v11) {
                edges.push(right);
            }
            if pos(v11) != pos(v01) {
                edges.push(top);
            }
            if pos(v01) != pos(v00) {
                edges.push(left);
            }
            match edges.len() {
                2 => segs.push([edges[0], edges[1]]),
                4 => {
                    let c = Point::new(rect.xmin + (i as f64 + 0.5) * cell, rect.ymin + (j as f64 + 0.5) * cell);
                    let vc = g(c).unwrap_or(0.25 * (v00 + v10 + v01 + v11));
                    // connect so that the center's sign region stays connected
                    if pos(vc) == pos(v00) {
                        segs.push([bottom, right]);
                        segs.push([top, left]);
                    } else {
                        segs.push([left, bottom]);
                        segs.push([right, top]);
                    }
                }
                _ => {}
            }
        }
    }
    for s in &segs {
        for e in s {
            edge_point(e.0, e.1, e.2);
        }
    }

    // link segments into chains through shared edges
    let mut adj: HashMap<(usize, usize, u8), Vec<usize>> = HashMap::new();
    for (k, s) in segs.iter().enumerate() {
        adj.entry(s[0]).or_default().push(k);
        adj.entry(s[1]).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let mut order: Vec<usize> = (0..segs.len()).collect();
    // start open chains at their ends so they are traced in one piece
    order.sort_by_key(|&k| {
        let ends = segs[k].iter().filter(|e| adj[*e].len() == 1).count();
        std::cmp::Reverse(ends)
    });
    for start in order {
        if used[start] {
            continue;
        }
        used[start] = true;
        let s = segs[start];
        let (first, mut cur) = if adj[&s[1]].len() == 1 && adj[&s[0]].len() > 1 { (s[1], s[0]) } else { (s[0], s[1]) };
        let mut keys = vec![first, cur];
        let mut closed = false;
        loop {
            let next = adj[&cur].iter().copied().find(|&k| !used[k]);
            let Some(k) = next else { break };
            used[k] = true;
            let other = if segs[k][0] == cur { segs[k][1] } else { segs[k][0] };
            if other == first {
                keys.push(other);
                closed = true;
                break;
            }
            keys.push(other);
            cur = other;
        }
        let pts: Vec<Point> = keys.iter().map(|e| crossing[e]).collect();
        out.push((pts, closed));
    }
    out
}

fn bisect_edge<G: Fn(Point) -> Option<f64>>(g: &G, a: Point, b: Point, va: f64, vb: f64) -> Point {
    let lerp = |t: f64| Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
    let (mut lo, mut hi) = (0.0, 1.0);
    let pa = va >= 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match g(lerp(mid)) {
            Some(v) if (v >= 0.0) == pa => lo = mid,
            Some(_) => hi = mid,
            None => break,
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    if lo == 0.0 && hi == 1.0 {
        // fall back to linear interpolation
        return lerp(va / (va - vb));
    }
    lerp(0.5 * (lo + hi))
}

fn orient_ccw(mut v: Vec<Point>, closed: bool) -> Vec<Point> {
    if closed {
        let area: f64 = v.windows(2).map(|w| w[0].x * w[1].y - w[1].x * w[0].y).sum();
        if area < 0.0 {
            v.reverse();
        }
    }
    v
}

/// Connected components of `{u = c}` inside `domain`.
pub fn extract_level(u: &ScalarField, c: f64, domain: &Domain, cell: f64) -> Result<Vec<LevelCurve>> {
    if !(cell > 0.0) {
        return Err(Error::InvalidArgument("cell size must be positive".into()));
    }
    let sample = |p: Point| -> Option<f64> {
        if domain.contains(p) && u.contains(p) {
            u.eval(p).ok()
        } else {
            None
        }
    };
    let (lo, hi) = sampled_range(&sample, domain.rect, cell);
    if lo.is_infinite() {
        return Err(Error::DomainEmpty);
    }
    if !(c > lo && c < hi) {
        return Err(Error::LevelOutOfRange { level: c, min: lo, max: hi });
    }
    let g = |p: Point| sample(p).map(|v| v - c);
    Ok(trace_zero_set(&g, domain.rect, cell)
        .into_iter()
        .filter(|(v, _)| v.len() >= 2)
        .map(|(v, closed)| LevelCurve {
            level: c,
            vertices: orient_ccw(v, closed),
            closed,
            kind: CurveKind::Level,
            theta: None,
        })
        .collect())
}

fn sampled_range<G: Fn(Point) -> Option<f64>>(g: &G, rect: Rect, cell: f64) -> (f64, f64) {
    let nx = ((rect.xmax - rect.xmin) / cell).ceil() as usize + 1;
    let ny = ((rect.ymax - rect.ymin) / cell).ceil() as usize + 1;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..ny {
        for i in 0..nx {
            if let Some(v) = g(Point::new(rect.xmin + i as f64 * cell, rect.ymin + j as f64 * cell)) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    (lo, hi)
}

/// Signed curvature of the level line through `p`:
/// `k = -(u_xx u_y² - 2 u_xy u_x u_y + u_yy u_x²) / |∇u|³`.
///
/// Level circles of a convex paraboloid get negative curvature.
pub fn curvature_at(u: &ScalarField, p: Point) -> Result<f64> {
    let d = u.derivs(p, 2)?;
    let [ux, uy] = d.gradient();
    let [uxx, uxy, uyy] = d.hessian();
    let g = ux.hypot(uy);
    let hs = uxx.abs().max(uxy.abs()).max(uyy.abs());
    if g == 0.0 || g <= 1e-12 * hs.max(f64::MIN_POSITIVE) {
        return Err(Error::GradientTooSmall { gradient_norm: g });
    }
    Ok(-(uxx * uy * uy - 2.0 * uxy * ux * uy + uyy * ux * ux) / (g * g * g))
}

/// Moves `p` onto `{u = c}` along the gradient.
fn project(u: &ScalarField, c: f64, mut p: Point) -> Point {
    for _ in 0..20 {
        let Ok(d) = u.derivs(p, 1) else { return p };
        let [gx, gy] = d.gradient();
        let g2 = gx * gx + gy * gy;
        if g2 == 0.0 {
            return p;
        }
        let r = d.value() - c;
        let q = Point::new(p.x - r * gx / g2, p.y - r * gy / g2);
        let done = q.dist(p) < 1e-15 * (1.0 + p.x.abs() + p.y.abs());
        if !u.contains(q) {
            return p;
        }
        p = q;
        if done {
            break;
        }
    }
    p
}

/// Minimum curvature along a level curve: discrete minimum over vertices,
/// refined by golden-section search on the two adjacent segments with
/// on-curve projection.
pub fn min_curvature_on_curve(u: &ScalarField, curve: &LevelCurve) -> Result<(Point, f64)> {
    let v = &curve.vertices;
    if v.is_empty() {
        return Err(Error::InvalidArgument("empty curve".into()));
    }
    let ks: Vec<f64> = v.iter().map(|p| curvature_at(u, *p)).collect::<Result<_>>()?;
    let (imin, kmin) = ks.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &k)| if k < acc.1 { (i, k) } else { acc });
    let n = v.len();
    let last = if curve.closed { n - 1 } else { n };
    let prev = if imin > 0 { Some(v[imin - 1]) } else if curve.closed && n > 2 { Some(v[n - 2]) } else { None };
    let next = if imin + 1 < last { Some(v[imin + 1]) } else if curve.closed && n > 2 { Some(v[1]) } else { None };
    let (Some(a), Some(b)) = (prev, next) else { return Ok((v[imin], kmin)) };
    let m = v[imin];
    // parameter t in [0, 2]: a -> m -> b
    let at = |t: f64| -> Point {
        let (p, q, s) = if t <= 1.0 { (a, m, t) } else { (m, b, t - 1.0) };
        project(u, curve.level, Point::new(p.x + s * (q.x - p.x), p.y + s * (q.y - p.y)))
    };
    let f = |t: f64| curvature_at(u, at(t)).unwrap_or(f64::INFINITY);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 2.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let kt = f(t);
    Ok(if kt < kmin { (at(t), kt) } else { (m, kmin) })
}

/// `u_θ = cos θ u_x + sin θ u_y` as a field of the same kind when possible.
pub fn directional_field(u: &ScalarField, theta: f64) -> Option<ScalarField> {
    let p = u.as_poly()?;
    let (c, s) = (rat_from_f64(theta.cos())?, rat_from_f64(theta.sin())?);
    let v: Poly2 = &p.derivative(1, 0).scale(&c) + &p.derivative(0, 1).scale(&s);
    Some(ScalarField::Poly(v))
}

/// Result of tracing a nodal set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodalSet {
    pub theta: f64,
    pub curves: Vec<LevelCurve>,
    /// Points of `∂Ω` where `u_θ` changes sign.
    pub boundary_points: Vec<Point>,
    /// Some component is a closed curve inside the domain.
    pub has_closed_interior_component: bool,
}

/// Traces `{u_θ = 0}` in `domain` and locates its intersections with the
/// domain boundary by bisection of `u_θ` along the traced boundary curve.
pub fn directional_nodal_set(u: &ScalarField, theta: f64, domain: &Domain, cell: f64) -> Result<NodalSet> {
    let (c, s) = (theta.cos(), theta.sin());
    let poly = directional_field(u, theta);
    let u_theta = |p: Point| -> Option<f64> {
        match &poly {
            Some(v) => v.eval(p).ok(),
            None => u.gradient(p).ok().map(|g| c * g[0] + s * g[1]),
        }
    };
    let inside = |p: Point| -> Option<f64> {
        if domain.contains(p) && u.contains(p) {
            u_theta(p)
        } else {
            None
        }
    };
    let curves: Vec<LevelCurve> = trace_zero_set(&inside, domain.rect, cell)
        .into_iter()
        .filter(|(v, _)| v.len() >= 2)
        .map(|(v, closed)| LevelCurve {
            level: 0.0,
            vertices: orient_ccw(v, closed),
            closed,
            kind: if theta == 0.0 { CurveKind::NodalX } else { CurveKind::NodalTheta },
            theta: Some(theta),
        })
        .collect();
    let has_closed_interior_component = curves.iter().any(|c| c.closed);

    let boundary = boundary_curves(domain, cell)?;
    let mut boundary_points = Vec::new();
    for b in &boundary {
        boundary_points.extend(boundary_sign_changes(u, &u_theta, domain, b, cell)?);
    }
    Ok(NodalSet { theta, curves, boundary_points, has_closed_interior_component })
}

/// Closed components of `∂Ω`, traced as the zero set of the domain's level function.
pub fn boundary_curves(domain: &Domain, cell: f64) -> Result<Vec<LevelCurve>> {
    let r = domain.rect;
    let pad = 2.0 * cell;
    let big = Rect::new(r.xmin - pad, r.xmax + pad, r.ymin - pad, r.ymax + pad);
    let phi = |p: Point| domain.phi(p);
    let curves: Vec<LevelCurve> = trace_zero_set(&phi, big, cell)
        .into_iter()
        .filter(|(v, closed)| *closed && v.len() >= 4)
        .map(|(v, closed)| LevelCurve { level: 0.0, vertices: orient_ccw(v, closed), closed, kind: CurveKind::Level, theta: None })
        .collect();
    if curves.is_empty() {
        return Err(Error::DomainEmpty);
    }
    Ok(curves)
}

/// Evaluation point for boundary quantities: the boundary point itself when
/// the field is defined there, otherwise the nearest point inward along `∇φ`.
fn inward(u: &ScalarField, domain: &Domain, p: Point, cell: f64) -> Option<Point> {
    if u.contains(p) {
        return Some(p);
    }
    let h = 1e-6 * cell;
    let gx = (domain.phi(Point::new(p.x + h, p.y))? - domain.phi(Point::new(p.x - h, p.y))?) / (2.0 * h);
    let gy = (domain.phi(Point::new(p.x, p.y + h))? - domain.phi(Point::new(p.x, p.y - h))?) / (2.0 * h);
    let n = gx.hypot(gy);
    if n == 0.0 {
        return None;
    }
    (1..=16).map(|k| k as f64 * 0.25 * cell).map(|t| Point::new(p.x + t * gx / n, p.y + t * gy / n)).find(|q| u.contains(*q))
}

fn boundary_sign_changes<F: Fn(Point) -> Option<f64>>(
    u: &ScalarField,
    u_theta: &F,
    domain: &Domain,
    b: &LevelCurve,
    cell: f64,
) -> Result<Vec<Point>> {
    // densify so that each boundary segment is at most a quarter cell
    let mut pts = Vec::new();
    for w in b.vertices.windows(2) {
        let m = ((w[0].dist(w[1]) / (0.25 * cell)).ceil() as usize).max(1);
        for k in 0..m {
            let t = k as f64 / m as f64;
            pts.push(Point::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y)));
        }
    }
    let mut evals = Vec::with_capacity(pts.len());
    let mut gmax = 0.0f64;
    let mut gmin = f64::INFINITY;
    for p in &pts {
        let q = inward(u, domain, *p, cell).ok_or(Error::PointOutsideDomain { x: p.x, y: p.y })?;
        let g = u.gradient(q)?;
        let gn = g[0].hypot(g[1]);
        gmax = gmax.max(gn);
        gmin = gmin.min(gn);
        evals.push(u_theta(q).ok_or(Error::PointOutsideDomain { x: q.x, y: q.y })?);
    }
    if gmin <= 1e-6 * gmax {
        return Err(Error::BoundaryGradientVanishes);
    }
    let n = pts.len();
    let mut out = Vec::new();
    for k in 0..n {
        let (a, bb) = (pts[k], pts[(k + 1) % n]);
        let (va, vb) = (evals[k], evals[(k + 1) % n]);
        if (va >= 0.0) != (vb >= 0.0) {
            let f = |p: Point| inward(u, domain, p, cell).and_then(|q| u_theta(q));
            out.push(bisect_edge(&f, a, bb, va, vb));
        }
    }
    Ok(out)
}

/// Number of nodal branches of `v` through `p`: sign changes of `v` on a
/// small circle about `p`, halved. The radius is halved until two successive
/// circles agree.
pub fn nodal_branch_count(v: &ScalarField, p: Point) -> Result<usize> {
    let r_max = crate::index::max_radius(v, p);
    let count = |r: f64| -> Result<Option<usize>> {
        let m = 720;
        let mut vals = Vec::with_capacity(m);
        let mut vmax = 0.0f64;
        for k in 0..m {
            let t = TAU * (k as f64 + 0.5) / m as f64;
            let q = Point::new(p.x + r * t.cos(), p.y + r * t.sin());
            let x = v.eval(q)?;
            vmax = vmax.max(x.abs());
            vals.push(x);
        }
        if vmax == 0.0 || vals.iter().any(|x| x.abs() <= 1e-13 * vmax) {
            return Ok(None);
        }
        Ok(Some((0..m).filter(|&k| (vals[k] >= 0.0) != (vals[(k + 1) % m] >= 0.0)).count()))
    };
    let mut prev: Option<usize> = None;
    for k in 1..=20 {
        let r = r_max / 2f64.powi(k);
        let c = count(r)?;
        if let (Some(a), Some(b)) = (prev, c) {
            if a == b {
                if a == 0 {
                    return Err(Error::NoSignStructure);
                }
                return Ok(a / 2);
            }
        }
        prev = c;
    }
    Err(Error::NoSignStructure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{rat, rat_int, Expr, FieldExpr};

    fn paraboloid() -> ScalarField {
        ScalarField::Poly(Poly2::from_terms([(2, 0, rat_int(1)), (0, 2, rat_int(1))]))
    }

    #[test]
    fn unit_circle_level() {
        let dom = Domain::rect(Rect::new(-2.0, 2.0, -2.0, 2.0));
        let cs = extract_level(&paraboloid(), 1.0, &dom, 1.0 / 128.0).unwrap();
        assert_eq!(cs.len(), 1);
        assert!(cs[0].closed);
        assert!(cs[0].signed_area() > 0.0);
        let dev = cs[0].vertices.iter().map(|p| (p.x.hypot(p.y) - 1.0).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-6, "{dev}");
        let (_, k) = min_curvature_on_curve(&paraboloid(), &cs[0]).unwrap();
        assert!((k + 1.0).abs() < 1e-9);
    }

    #[test]
    fn level_out_of_range() {
        let dom = Domain::rect(Rect::new(-1.0, 1.0, -1.0, 1.0));
        assert!(matches!(extract_level(&paraboloid(), 5.0, &dom, 0.1), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn curvature_of_shifted_circles() {
        let p = Poly2::from_terms([(1, 0, rat_int(1)), (0, 0, rat(-1, 2))]).pow(2);
        let q = Poly2::from_terms([(0, 1, rat_int(1)), (0, 0, rat(-1, 2))]).pow(2);
        let u = ScalarField::Poly(&p + &q);
        let k = curvature_at(&u, Point::new(0.5 + 0.3, 0.5)).unwrap();
        assert!((k + 1.0 / 0.3).abs() < 1e-9);
        assert!(matches!(curvature_at(&u, Point::new(0.5, 0.5)), Err(Error::GradientTooSmall { .. })));
    }

    #[test]
    fn branch_counts() {
        let re4 = ScalarField::Poly(Poly2::harmonic_basis(4, crate::field::HarmonicPart::Real).unwrap());
        assert_eq!(nodal_branch_count(&re4, Point::ORIGIN).unwrap(), 4);
        let x = ScalarField::Poly(Poly2::x());
        assert_eq!(nodal_branch_count(&x, Point::ORIGIN).unwrap(), 1);
        assert_eq!(nodal_branch_count(&paraboloid(), Point::ORIGIN), Err(Error::NoSignStructure));
    }

    #[test]
    fn paraboloid_nodal_set_on_disk() {
        let disk = Expr::parse("(- 1 (+ (^ x 2) (^ y 2)))").unwrap();
        let dom = Domain::with_level(
            Rect::new(-1.0, 1.0, -1.0, 1.0),
            ScalarField::Expr(FieldExpr::new(disk)),
        );
        let ns = directional_nodal_set(&paraboloid(), std::f64::consts::FRAC_PI_2, &dom, 1.0 / 64.0).unwrap();
        assert_eq!(ns.boundary_points.len(), 2);
        for p in &ns.boundary_points {
            assert!(p.y.abs() < 1e-9 && (p.x.abs() - 1.0).abs() < 1e-6, "{p:?}");
        }
        assert!(!ns.has_closed_interior_component);
    }
}
