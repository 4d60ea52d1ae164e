//! Scalar fields in the plane and their derivatives.
//!
//! Three backings share one interface: exact rational polynomials
//! ([`Poly2`]), closed-form expressions ([`FieldExpr`]) and sampled grids
//! ([`GridField`]). Derivatives are exact for polynomials, analytic
//! (Taylor-mode) for expressions and taken from the local interpolant for grids.

mod expr;
mod grid;
pub mod io;
mod nonlinearity;
mod poly2;
pub mod special;
mod taylor;

pub use expr::{Expr, Func};
pub use grid::{GridField, NodeKind};
pub use nonlinearity::Nonlinearity;
pub use poly2::{
    rat, rat_approx, rat_from_f64, rat_int, rat_sqrt_exact, rat_to_f64, HarmonicPart, Poly2, Rational,
};
pub use taylor::{Derivs, Taylor2};
pub(crate) use taylor::factorial;

use crate::error::{Error, Result};

/// A point of the plane.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Rect { xmin, xmax, ymin, ymax }
    }

    pub fn centered(c: Point, half: f64) -> Self {
        Rect::new(c.x - half, c.x + half, c.y - half, c.y + half)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn diameter(&self) -> f64 {
        (self.xmax - self.xmin).hypot(self.ymax - self.ymin)
    }

    /// Distance from an inside point to the nearest side.
    pub fn inner_distance(&self, p: Point) -> f64 {
        (p.x - self.xmin).min(self.xmax - p.x).min(p.y - self.ymin).min(self.ymax - p.y)
    }
}

/// A planar region: the points of `rect` where the level function, if any,
/// is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub rect: Rect,
    pub level: Option<ScalarField>,
}

impl Domain {
    pub fn rect(rect: Rect) -> Self {
        Domain { rect, level: None }
    }

    pub fn with_level(rect: Rect, level: ScalarField) -> Self {
        Domain { rect, level: Some(level) }
    }

    /// Level function value: positive inside, zero on the boundary. Without
    /// an explicit level function the distance to the nearest side is used.
    pub fn phi(&self, p: Point) -> Option<f64> {
        let r = self.rect.inner_distance(p);
        match &self.level {
            None => Some(r),
            Some(l) => l.eval(p).ok().map(|v| if r < 0.0 { r.min(v) } else { v }),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.rect.contains(p) && self.phi(p).is_some_and(|v| v > 0.0)
    }
}

/// A closed-form field, optionally restricted to a rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldExpr {
    pub expr: Expr,
    pub bounds: Option<Rect>,
}

impl FieldExpr {
    pub fn new(expr: Expr) -> Self {
        FieldExpr { expr, bounds: None }
    }

    pub fn with_bounds(expr: Expr, bounds: Rect) -> Self {
        FieldExpr { expr, bounds: Some(bounds) }
    }
}

/// An evaluatable scalar field in the plane.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarField {
    Poly(Poly2),
    Expr(FieldExpr),
    Grid(GridField),
}

impl From<Poly2> for ScalarField {
    fn from(p: Poly2) -> Self {
        ScalarField::Poly(p)
    }
}

impl From<FieldExpr> for ScalarField {
    fn from(e: FieldExpr) -> Self {
        ScalarField::Expr(e)
    }
}

impl From<GridField> for ScalarField {
    fn from(g: GridField) -> Self {
        ScalarField::Grid(g)
    }
}

impl ScalarField {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ScalarField::Poly(_) => "poly",
            ScalarField::Expr(_) => "expr",
            ScalarField::Grid(_) => "grid",
        }
    }

    pub fn as_poly(&self) -> Option<&Poly2> {
        match self {
            ScalarField::Poly(p) => Some(p),
            _ => None,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            ScalarField::Poly(_) => p.x.is_finite() && p.y.is_finite(),
            ScalarField::Expr(e) => e.bounds.map_or(true, |b| b.contains(p)),
            ScalarField::Grid(g) => g.contains(p.x, p.y),
        }
    }

    /// Bounding rectangle of the evaluation domain, if it has one.
    pub fn bounds(&self) -> Option<Rect> {
        match self {
            ScalarField::Poly(_) => None,
            ScalarField::Expr(e) => e.bounds,
            ScalarField::Grid(g) => {
                let [a, b, c, d] = g.extent();
                Some(Rect::new(a, b, c, d))
            }
        }
    }

    pub fn eval(&self, p: Point) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::PointOutsideDomain { x: p.x, y: p.y });
        }
        Ok(match self {
            ScalarField::Poly(q) => q.eval(p.x, p.y),
            ScalarField::Expr(e) => e.expr.eval(p.x, p.y),
            ScalarField::Grid(g) => g.eval(p.x, p.y)?,
        })
    }

    /// Partial derivatives up to `order` at `p`.
    pub fn derivs(&self, p: Point, order: usize) -> Result<Derivs> {
        if !self.contains(p) {
            return Err(Error::PointOutsideDomain { x: p.x, y: p.y });
        }
        match self {
            ScalarField::Poly(q) => Ok(q.derivs(p.x, p.y, order)),
            ScalarField::Expr(e) => Ok(e.expr.derivs(p.x, p.y, order)),
            ScalarField::Grid(g) => g.derivs(p.x, p.y, order),
        }
    }

    pub fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        Ok(self.derivs(p, 1)?.gradient())
    }

    /// `cos θ u_x + sin θ u_y`.
    pub fn directional(&self, p: Point, theta: f64) -> Result<f64> {
        let g = self.gradient(p)?;
        Ok(theta.cos() * g[0] + theta.sin() * g[1])
    }

    /// `Δu(p) + f(u(p))`, zero where the field solves `-Δu = f(u)`.
    ///
    /// Exact for polynomials when `f` is constant.
    pub fn pde_residual(&self, f: &Nonlinearity, p: Point) -> Result<f64> {
        if let (ScalarField::Poly(q), Some(c)) = (self, f.constant_value()) {
            let x = rat_from_f64(p.x).ok_or(Error::PointOutsideDomain { x: p.x, y: p.y })?;
            let y = rat_from_f64(p.y).ok_or(Error::PointOutsideDomain { x: p.x, y: p.y })?;
            let lap = q.laplacian().eval_exact(&x, &y);
            return Ok(rat_to_f64(&(lap + c)));
        }
        let d = match self {
            ScalarField::Grid(g) => grid_laplacian(g, p)?,
            _ => self.derivs(p, 2)?,
        };
        Ok(d.laplacian() + f.eval(d.value()))
    }
}

/// Second derivatives of a grid field from node-centered differences when `p`
/// is a node, otherwise from the interpolant.
fn grid_laplacian(g: &GridField, p: Point) -> Result<Derivs> {
    let fi = (p.x - g.x0) / g.hx;
    let fj = (p.y - g.y0) / g.hy;
    let (i, j) = (fi.round(), fj.round());
    if (fi - i).abs() < 1e-9 && (fj - j).abs() < 1e-9 && i >= 1.0 && j >= 1.0 {
        let (i, j) = (i as usize, j as usize);
        if i + 1 < g.nx && j + 1 < g.ny && g.kind(i, j) == NodeKind::Interior {
            let c = g.value(i, j);
            let mut d = Derivs::zeros(2);
            d.set(0, 0, c);
            d.set(2, 0, (g.value(i + 1, j) - 2.0 * c + g.value(i - 1, j)) / (g.hx * g.hx));
            d.set(0, 2, (g.value(i, j + 1) - 2.0 * c + g.value(i, j - 1)) / (g.hy * g.hy));
            return Ok(d);
        }
    }
    g.derivs(p.x, p.y, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_solves_linear_problem() {
        let u = ScalarField::Expr(FieldExpr::new(Expr::parse("(cos y)").unwrap()));
        let f = Nonlinearity::parse("u").unwrap();
        for k in 0..20 {
            let p = Point::new(0.37 * k as f64 - 3.0, 0.53 * k as f64 - 5.0);
            assert!(u.pde_residual(&f, p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn bounded_expression_rejects_outside_points() {
        let u = ScalarField::Expr(FieldExpr::with_bounds(Expr::X, Rect::new(0.0, 1.0, 0.0, 1.0)));
        assert_eq!(u.eval(Point::new(2.0, 0.5)), Err(Error::PointOutsideDomain { x: 2.0, y: 0.5 }));
        assert_eq!(u.eval(Point::new(0.5, 0.5)), Ok(0.5));
    }
}
