//! Taylor jets at a point, rotation to normal form, and the orders `n` and `l`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{
    factorial, rat_approx, rat_from_f64, rat_sqrt_exact, rat_to_f64, Derivs, Expr, GridField, Point, Poly2,
    Rational, ScalarField,
};

/// Highest jet order supported by the numeric path.
pub const MAX_NUMERIC_ORDER: usize = 6;

fn idx(a: usize, b: usize) -> usize {
    let k = a + b;
    k * (k + 1) / 2 + b
}

fn len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Partial derivatives `∂^{a+b}u/∂x^a∂y^b` at a point for `a + b <= order`,
/// with an error estimate per coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorJet {
    pub center: Point,
    order: usize,
    coeffs: Vec<f64>,
    errs: Vec<f64>,
    exact: Option<Vec<Rational>>,
}

#[derive(Serialize)]
struct JetEntry {
    a: usize,
    b: usize,
    value: f64,
    err: f64,
}

impl Serialize for TaylorJet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            center: &'a Point,
            order: usize,
            exact: bool,
            coeffs: Vec<JetEntry>,
        }
        let coeffs = (0..=self.order)
            .flat_map(|k| (0..=k).map(move |b| (k - b, b)))
            .map(|(a, b)| JetEntry { a, b, value: self.coeff(a, b), err: self.err(a, b) })
            .collect();
        View { center: &self.center, order: self.order, exact: self.is_exact(), coeffs }.serialize(s)
    }
}

impl TaylorJet {
    /// A jet with floating-point coefficients and error estimates.
    pub fn from_derivs(center: Point, d: &Derivs, errs: Option<&Derivs>) -> Self {
        let order = d.order();
        let mut coeffs = vec![0.0; len(order)];
        let mut e = vec![0.0; len(order)];
        for k in 0..=order {
            for b in 0..=k {
                coeffs[idx(k - b, b)] = d.get(k - b, b);
                e[idx(k - b, b)] = errs.map_or(0.0, |x| x.get(k - b, b));
            }
        }
        TaylorJet { center, order, coeffs, errs: e, exact: None }
    }

    /// A jet with exact rational coefficients, listed by total order then by `b`.
    pub fn from_exact(center: Point, order: usize, exact: Vec<Rational>) -> Self {
        assert_eq!(exact.len(), len(order));
        let coeffs = exact.iter().map(rat_to_f64).collect();
        TaylorJet { center, order, coeffs, errs: vec![0.0; len(order)], exact: Some(exact) }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Coefficient `(a, b)`; zero above the jet order.
    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.order {
            0.0
        } else {
            self.coeffs[idx(a, b)]
        }
    }

    pub fn err(&self, a: usize, b: usize) -> f64 {
        if a + b > self.order {
            0.0
        } else {
            self.errs[idx(a, b)]
        }
    }

    pub fn exact_coeff(&self, a: usize, b: usize) -> Option<Rational> {
        self.exact.as_ref().map(|e| if a + b > self.order { Rational::zero() } else { e[idx(a, b)].clone() })
    }

    /// Largest coefficient magnitude of total order `k`.
    pub fn order_scale(&self, k: usize) -> f64 {
        (0..=k.min(self.order)).map(|b| self.coeff(k - b, b).abs()).fold(0.0, f64::max)
    }

    /// Decides whether coefficient `(a, b)` vanishes: exactly on the exact
    /// path, otherwise `|c| < max(10 err, 1e-9 scale)` with `scale` the
    /// largest coefficient of the same order.
    pub fn is_zero(&self, a: usize, b: usize) -> bool {
        if let Some(c) = self.exact_coeff(a, b) {
            return c.is_zero();
        }
        let c = self.coeff(a, b).abs();
        c == 0.0 || c < (10.0 * self.err(a, b)).max(1e-9 * self.order_scale(a + b))
    }

    pub fn gradient(&self) -> [f64; 2] {
        [self.coeff(1, 0), self.coeff(0, 1)]
    }

    pub fn gradient_norm(&self) -> f64 {
        let g = self.gradient();
        g[0].hypot(g[1])
    }

    /// `[u_xx, u_xy, u_yy]`.
    pub fn hessian(&self) -> [f64; 3] {
        [self.coeff(2, 0), self.coeff(1, 1), self.coeff(0, 2)]
    }

    /// Multiplies every coefficient by `lambda`.
    pub fn scaled(&self, lambda: &Rational) -> Self {
        let l = rat_to_f64(lambda);
        TaylorJet {
            center: self.center,
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * l).collect(),
            errs: self.errs.iter().map(|e| e * l.abs()).collect(),
            exact: self.exact.as_ref().map(|v| v.iter().map(|c| c * lambda).collect()),
        }
    }

    /// The Taylor polynomial `Σ c_ab x^a y^b / (a! b!)` (exact path only).
    fn taylor_poly(&self) -> Option<Poly2> {
        let exact = self.exact.as_ref()?;
        let mut terms = Vec::new();
        for k in 0..=self.order {
            for b in 0..=k {
                let a = k - b;
                let den = fact_big(a) * fact_big(b);
                terms.push((a as u32, b as u32, &exact[idx(a, b)] / Rational::from_integer(den)));
            }
        }
        Some(Poly2::from_terms(terms))
    }

    /// Jet of `U(X, Y) = u(center + (cX - sY, sX + cY))`, i.e. the jet in
    /// coordinates whose x-axis points along `(c, s)`.
    pub fn rotated(&self, c: f64, s: f64) -> Self {
        let mut coeffs = vec![0.0; len(self.order)];
        let mut errs = vec![0.0; len(self.order)];
        for k in 0..=self.order {
            for b in 0..=k {
                let a = k - b;
                // u_ab x^a y^b / (a! b!) with x = cX - sY, y = sX + cY
                let w = expand_linear(a, b, c, s);
                let base = self.coeffs[idx(a, b)] / (factorial(a) * factorial(b));
                let ebase = self.errs[idx(a, b)] / (factorial(a) * factorial(b));
                for (bb, wv) in w.iter().enumerate() {
                    let aa = k - bb;
                    let f = factorial(aa) * factorial(bb);
                    coeffs[idx(aa, bb)] += wv * base * f;
                    errs[idx(aa, bb)] += (wv * ebase * f).abs();
                }
            }
        }
        // rounding of the rotation itself
        for k in 0..=self.order {
            let sc = self.order_scale(k);
            for b in 0..=k {
                errs[idx(k - b, b)] += 8.0 * f64::EPSILON * sc * (k as f64 + 1.0);
            }
        }
        TaylorJet { center: self.center, order: self.order, coeffs, errs, exact: None }
    }

    /// Exact rotation by a rational cosine-sine pair.
    pub fn rotated_exact(&self, c: &Rational, s: &Rational) -> Option<Self> {
        let p = self.taylor_poly()?.rotate(c, s);
        Some(jet_exact_at(&p, &Rational::zero(), &Rational::zero(), self.order).recentered(self.center))
    }

    fn recentered(mut self, center: Point) -> Self {
        self.center = center;
        self
    }
}

fn fact_big(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Coefficients of `Y^j X^{a+b-j}` in `(cX - sY)^a (sX + cY)^b`, indexed by `j`.
fn expand_linear(a: usize, b: usize, c: f64, s: f64) -> Vec<f64> {
    let mut out = vec![0.0; a + b + 1];
    for i in 0..=a {
        let p = binom(a, i) * c.powi((a - i) as i32) * (-s).powi(i as i32);
        for j in 0..=b {
            let q = binom(b, j) * s.powi((b - j) as i32) * c.powi(j as i32);
            out[i + j] += p * q;
        }
    }
    out
}

/// Exact jet of a polynomial at a rational point.
pub fn jet_exact_at(p: &Poly2, x: &Rational, y: &Rational, order: usize) -> TaylorJet {
    let mut exact = Vec::with_capacity(len(order));
    for k in 0..=order {
        for b in 0..=k {
            exact.push(p.derivative((k - b) as u32, b as u32).eval_exact(x, y));
        }
    }
    TaylorJet::from_exact(Point::new(rat_to_f64(x), rat_to_f64(y)), order, exact)
}

/// Exact jet of a polynomial.
///
/// Coordinates are snapped to nearby rationals with small denominators when
/// the exact gradient vanishes there, so critical points such as `-1/24`
/// that floating point cannot represent still get an exactly zero gradient.
pub fn jet_exact(p: &Poly2, center: Point, order: usize) -> TaylorJet {
    snap_critical(p, center)
        .map(|(x, y)| jet_exact_at(p, &x, &y, order))
        .unwrap_or_else(|| {
            let x = rat_from_f64(center.x).unwrap_or_else(Rational::zero);
            let y = rat_from_f64(center.y).unwrap_or_else(Rational::zero);
            jet_exact_at(p, &x, &y, order)
        })
}

/// A rational point near `center` where the exact gradient vanishes.
pub fn snap_critical(p: &Poly2, center: Point) -> Option<(Rational, Rational)> {
    let px = p.derivative(1, 0);
    let py = p.derivative(0, 1);
    for den in [1i64, 100, 10_000, 1_000_000] {
        let (Some(x), Some(y)) = (rat_approx(center.x, den), rat_approx(center.y, den)) else {
            continue;
        };
        if (rat_to_f64(&x) - center.x).abs() > 1e-6 || (rat_to_f64(&y) - center.y).abs() > 1e-6 {
            continue;
        }
        if px.eval_exact(&x, &y).is_zero() && py.eval_exact(&x, &y).is_zero() {
            return Some((x, y));
        }
    }
    None
}

/// Jet of a closed-form field by Taylor-mode differentiation.
pub fn jet_analytic(e: &Expr, center: Point, order: usize) -> Result<TaylorJet> {
    let d = e.derivs(center.x, center.y, order);
    let mut errs = Derivs::zeros(order);
    let u0 = d.value().abs();
    for k in 0..=order {
        let sc = (0..=k).map(|b| d.get(k - b, b).abs()).fold(u0, f64::max);
        for b in 0..=k {
            let v = d.get(k - b, b);
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "derivative ({}, {b}) is not finite at ({}, {})",
                    k - b,
                    center.x,
                    center.y
                )));
            }
            errs.set(k - b, b, 1e3 * f64::EPSILON * sc);
        }
    }
    Ok(TaylorJet::from_derivs(center, &d, Some(&errs)))
}

/// Jet with the most accurate method available for the backing.
pub fn jet(u: &ScalarField, center: Point, order: usize) -> Result<TaylorJet> {
    if !u.contains(center) {
        return Err(Error::PointOutsideDomain { x: center.x, y: center.y });
    }
    match u {
        ScalarField::Poly(p) => Ok(jet_exact(p, center, order)),
        ScalarField::Expr(e) => jet_analytic(&e.expr, center, order),
        ScalarField::Grid(_) => jet_numeric(u, center, order.min(MAX_NUMERIC_ORDER), None),
    }
}

/// Default base step for derivatives of total order `k`: the accuracy is
/// `O(h^6)` after two Richardson levels, so roundoff `eps/h^k` balances at
/// `h ~ eps^(1/(k+6))`.
pub fn default_step(k: usize, feature_scale: f64) -> f64 {
    f64::EPSILON.powf(1.0 / (k as f64 + 6.0)) * feature_scale
}

/// Central finite-difference weights for the `d`-th derivative on integer
/// nodes `-m..=m` (Fornberg's recursion).
fn fd_weights(d: usize) -> (i32, Vec<f64>) {
    if d == 0 {
        return (0, vec![1.0]);
    }
    let m = d.div_ceil(2) as i32;
    let nodes: Vec<f64> = (-m..=m).map(f64::from).collect();
    let n = nodes.len();
    // c[j][k]: weight of node j for derivative k
    let mut c = vec![vec![0.0; d + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    for i in 1..n {
        let mn = i.min(d);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    (m, c.iter().map(|row| row[d]).collect())
}

fn feature_scale(u: &ScalarField) -> f64 {
    u.bounds().map_or(1.0, |b| b.diameter().min(1.0).max(1e-6))
}

/// Grid spacing when `center` is a node of a square grid.
fn node_aligned_spacing(g: &GridField, center: Point) -> Option<f64> {
    let fi = (center.x - g.x0) / g.hx;
    let fj = (center.y - g.y0) / g.hy;
    let square = (g.hx - g.hy).abs() <= 1e-12 * g.hx;
    (square && (fi - fi.round()).abs() < 1e-9 && (fj - fj.round()).abs() < 1e-9).then_some(g.hx)
}

/// Finite-difference jet: central tensor stencils at steps `h, h/2, h/4`
/// combined by two Richardson levels. `err` is the observed difference of the
/// last two extrapolants plus a roundoff bound.
///
/// Each total order `k` uses its own base step (`h0` if given, otherwise
/// [`default_step`]); on grids the steps are multiples of the spacing when
/// the center is a node.
pub fn jet_numeric(u: &ScalarField, center: Point, order: usize, h0: Option<f64>) -> Result<TaylorJet> {
    if order > MAX_NUMERIC_ORDER {
        return Err(Error::InvalidArgument(format!("numeric jets are limited to order {MAX_NUMERIC_ORDER}")));
    }
    let scale = feature_scale(u);
    let grid_h = match u {
        ScalarField::Grid(g) => node_aligned_spacing(g, center),
        _ => None,
    };
    let mut d = Derivs::zeros(order);
    let mut e = Derivs::zeros(order);
    d.set(0, 0, u.eval(center)?);
    for k in 1..=order {
        let base = h0.unwrap_or_else(|| default_step(k, scale));
        let (vals, errs) = order_block(u, center, k, base, grid_h, scale)?;
        for b in 0..=k {
            d.set(k - b, b, vals[b]);
            e.set(k - b, b, errs[b]);
        }
    }
    Ok(TaylorJet::from_derivs(center, &d, Some(&e)))
}

/// All derivatives of total order `k`: the largest step at or below `base`
/// whose stencil fits, then `2 base` and `4 base` if that one is noise
/// dominated (error above both the estimates and a tenth of the natural size
/// `max|u| / length^k`).
fn order_block(
    u: &ScalarField,
    center: Point,
    k: usize,
    base: f64,
    grid_h: Option<f64>,
    length: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let radius = 4 * k.div_ceil(2) as i32;
    let attempt = |h: f64| -> Option<Result<(Vec<f64>, Vec<f64>, bool)>> {
        let h = match grid_h {
            Some(gh) => {
                // the finest aligned stencil has quarter step = one cell
                4.0 * (h / 4.0 / gh).round().max(1.0) * gh
            }
            None => h,
        };
        let quarter = h / 4.0;
        let fits = (-radius..=radius).all(|i| {
            (-radius..=radius)
                .all(|j| u.contains(Point::new(center.x + i as f64 * quarter, center.y + j as f64 * quarter)))
        });
        if !fits {
            return None;
        }
        Some(richardson_block(u, center, k, h).map(|(vals, errs, m)| {
            let max_err = errs.iter().cloned().fold(0.0, f64::max);
            let max_val = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
            // natural size of an order-k derivative is m / length^k
            let noisy = max_err > max_val.max(0.1 * m / length.powi(k as i32));
            (vals, errs, noisy)
        }))
    };
    let mut fitted = false;
    for i in 0..8 {
        if let Some(r) = attempt(base / 2f64.powi(i)) {
            let (vals, errs, noisy) = r?;
            if !noisy {
                return Ok((vals, errs));
            }
            fitted = true;
            break;
        }
    }
    for factor in [2.0, 4.0] {
        if let Some(r) = attempt(base * factor) {
            let (vals, errs, noisy) = r?;
            fitted = true;
            if !noisy {
                return Ok((vals, errs));
            }
        }
    }
    Err(if fitted { Error::NoiseDominated } else { Error::StencilOutsideDomain })
}

fn richardson_block(u: &ScalarField, center: Point, k: usize, h: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let quarter = h / 4.0;
    let mut cache = std::collections::HashMap::new();
    let mut sample = |i: i32, j: i32| -> Result<f64> {
        if let Some(v) = cache.get(&(i, j)) {
            return Ok(*v);
        }
        let v = u.eval(Point::new(center.x + i as f64 * quarter, center.y + j as f64 * quarter))?;
        cache.insert((i, j), v);
        Ok(v)
    };
    let mut vals = Vec::with_capacity(k + 1);
    let mut errs = Vec::with_capacity(k + 1);
    let mut weight_sums = Vec::with_capacity(k + 1);
    for b in 0..=k {
        let a = k - b;
        let (ma, wa) = fd_weights(a);
        let (mb, wb) = fd_weights(b);
        let mut level = [0.0; 3];
        for (li, q) in [4i32, 2, 1].into_iter().enumerate() {
            let step = quarter * q as f64;
            let mut s = 0.0;
            for (ii, wi) in wa.iter().enumerate() {
                if *wi == 0.0 {
                    continue;
                }
                let i = (ii as i32 - ma) * q;
                for (jj, wj) in wb.iter().enumerate() {
                    if *wj == 0.0 {
                        continue;
                    }
                    let j = (jj as i32 - mb) * q;
                    s += wi * wj * sample(i, j)?;
                }
            }
            level[li] = s / step.powi(k as i32);
        }
        let r1a = (4.0 * level[1] - level[0]) / 3.0;
        let r1b = (4.0 * level[2] - level[1]) / 3.0;
        let r2 = (16.0 * r1b - r1a) / 15.0;
        vals.push(r2);
        errs.push((r2 - r1b).abs());
        let w: f64 = wa.iter().map(|x| x.abs()).sum::<f64>() * wb.iter().map(|x| x.abs()).sum::<f64>();
        weight_sums.push(w);
    }
    let m = cache.values().map(|v| v.abs()).fold(0.0, f64::max);
    for (b, e) in errs.iter_mut().enumerate() {
        // roundoff: Richardson weights 64/45, 20/45, 1/45 on the three levels
        let w = weight_sums[b];
        let amp = (64.0 / 45.0) * 4f64.powi(k as i32) + (20.0 / 45.0) * 2f64.powi(k as i32) + 1.0 / 45.0;
        *e += 4.0 * f64::EPSILON * m * w * amp / h.powi(k as i32);
    }
    Ok((vals, errs, m))
}

/// A jet rotated so that, at a degenerate critical point, `u_xx = u_xy = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalForm {
    /// Angle of the new x-axis, in `(-π/2, π/2]`.
    pub theta: f64,
    pub jet: TaylorJet,
    /// Eigenvalues of the original Hessian, ascending.
    pub eigenvalues: [f64; 2],
    pub degenerate: bool,
    /// Both Hessian eigenvalues vanish.
    pub hessian_zero: bool,
}

fn sym_eigen(h: [f64; 3]) -> [f64; 2] {
    let [a, b, c] = h;
    let m = 0.5 * (a + c);
    let d = (0.5 * (a - c)).hypot(b);
    [m - d, m + d]
}

/// Normalizes a direction to a unit vector with angle in `(-π/2, π/2]`.
fn canonical_dir(c: f64, s: f64) -> (f64, f64) {
    let n = c.hypot(s);
    let (c, s) = (c / n, s / n);
    if c < 0.0 || (c == 0.0 && s < 0.0) {
        (-c, -s)
    } else {
        (c, s)
    }
}

/// Rotates a jet taken at a critical point to the normal form.
///
/// Rank-one Hessians get their kernel aligned with the x-axis, a vanishing
/// Hessian gives `θ = 0`, and invertible Hessians are rotated to principal
/// axes and flagged nondegenerate. Exact jets are rotated exactly when the
/// kernel direction has rational cosine and sine.
pub fn rotate_to_normal_form(j: &TaylorJet, tol: f64) -> Result<NormalForm> {
    if j.order() < 2 {
        return Err(Error::JetOrderTooSmall { needed: 2, have: j.order() });
    }
    let gn = j.gradient_norm();
    let exact_zero_grad = j.is_exact() && j.is_zero(1, 0) && j.is_zero(0, 1);
    if !(exact_zero_grad || gn <= tol) {
        return Err(Error::NotACriticalPoint { gradient_norm: gn });
    }
    let h = j.hessian();
    let eig = sym_eigen(h);
    let (small, big) = if eig[0].abs() <= eig[1].abs() { (eig[0], eig[1]) } else { (eig[1], eig[0]) };

    let (degenerate, hessian_zero) = if let (Some(a), Some(b), Some(c)) =
        (j.exact_coeff(2, 0), j.exact_coeff(1, 1), j.exact_coeff(0, 2))
    {
        let det = &a * &c - &b * &b;
        (det.is_zero(), a.is_zero() && b.is_zero() && c.is_zero())
    } else {
        let herr = j.err(2, 0).max(j.err(1, 1)).max(j.err(0, 2));
        let zero = |l: f64, other: f64| l.abs() <= (1e-7 * other.abs().max(1.0)).max(10.0 * herr);
        (zero(small, big), zero(small, big) && zero(big, 0.0))
    };

    if hessian_zero {
        return Ok(NormalForm { theta: 0.0, jet: j.clone(), eigenvalues: eig, degenerate: true, hessian_zero });
    }
    if !degenerate {
        let theta = principal_angle(h);
        let jet = j.rotated(theta.cos(), theta.sin());
        return Ok(NormalForm { theta, jet, eigenvalues: eig, degenerate: false, hessian_zero });
    }

    // kernel direction
    if let (Some(a), Some(b), Some(c)) = (j.exact_coeff(2, 0), j.exact_coeff(1, 1), j.exact_coeff(0, 2)) {
        let (vx, vy) = if !c.is_zero() || !b.is_zero() { (-c.clone(), b.clone()) } else { (b.clone(), -a.clone()) };
        let n2 = &vx * &vx + &vy * &vy;
        if let Some(n) = rat_sqrt_exact(&n2) {
            let (mut cs, mut sn) = (vx / &n, vy / &n);
            if cs.is_negative() || (cs.is_zero() && sn.is_negative()) {
                cs = -cs;
                sn = -sn;
            }
            let theta = rat_to_f64(&sn).atan2(rat_to_f64(&cs));
            let jet = j.rotated_exact(&cs, &sn).expect("exact jet");
            return Ok(NormalForm { theta, jet, eigenvalues: eig, degenerate: true, hessian_zero });
        }
    }
    let [a, b, c] = h;
    let v1 = (b, small - a);
    let v2 = (small - c, b);
    let (vx, vy) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
    let (cs, sn) = canonical_dir(vx, vy);
    let theta = sn.atan2(cs);
    let jet = if theta == 0.0 { j.rotated(1.0, 0.0) } else { j.rotated(cs, sn) };
    Ok(NormalForm { theta, jet, eigenvalues: eig, degenerate: true, hessian_zero })
}

fn principal_angle(h: [f64; 3]) -> f64 {
    let [a, b, c] = h;
    if b == 0.0 && a == c {
        return 0.0;
    }
    let t = 0.5 * (2.0 * b).atan2(a - c);
    if t <= -std::f64::consts::FRAC_PI_2 {
        t + std::f64::consts::PI
    } else {
        t
    }
}

/// `n` with `α = ∂ⁿu/∂xⁿ` and `β = ∂ⁿu/∂xⁿ⁻¹∂y` in the normal form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinimalOrder {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

/// Smallest `n >= 3` with a nonzero coefficient `(n - k, k)`, `k <= n - 1`.
pub fn minimal_order_n(nf: &NormalForm) -> Result<MinimalOrder> {
    let j = &nf.jet;
    for n in 3..=j.order() {
        if (0..n).any(|k| !j.is_zero(n - k, k)) {
            return Ok(MinimalOrder { n, alpha: j.coeff(n, 0), beta: j.coeff(n - 1, 1) });
        }
    }
    Err(Error::OrderExhausted { max_order: j.order() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PureXOrder {
    pub l: usize,
    pub coeff: f64,
}

/// Smallest `l` in `[n + 1, 2n - 2]` with a nonzero pure-x coefficient.
pub fn first_pure_x_order_l(nf: &NormalForm, n: usize) -> Result<PureXOrder> {
    if n % 2 == 0 {
        return Err(Error::WrongParity(n));
    }
    let j = &nf.jet;
    let top = 2 * n - 2;
    if j.order() < top {
        return Err(Error::JetOrderTooSmall { needed: top, have: j.order() });
    }
    for l in n + 1..=top {
        if !j.is_zero(l, 0) {
            return Ok(PureXOrder { l, coeff: j.coeff(l, 0) });
        }
    }
    Err(Error::NoSuchL { from: n + 1, to: top })
}
