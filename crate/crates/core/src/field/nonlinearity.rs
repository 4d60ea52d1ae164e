//! Univariate nonlinearities `f(u)` of the equation `-Δu = f(u)`.

use std::fmt;

use super::expr::Expr;
use super::poly2::{rat_from_f64, Rational};
use crate::error::{Error, Result};

/// `f` as an expression in `u`, with its source text kept for reports.
#[derive(Clone, Debug, PartialEq)]
pub struct Nonlinearity {
    expr: Expr,
    source: String,
    /// Whether `f(0) >= 0`.
    pub nonnegative_at_zero: bool,
}

impl Nonlinearity {
    /// Parses a prefix expression in `u`, e.g. `1`, `u` or `(exp u)`.
    pub fn parse(src: &str) -> Result<Self> {
        let expr = Expr::parse(src)?;
        if references_y(&expr) {
            return Err(Error::Parse { line: 1, message: "nonlinearity may only depend on u".into() });
        }
        Ok(Self::from_expr(expr, src.trim().to_string()))
    }

    fn from_expr(expr: Expr, source: String) -> Self {
        let f0 = expr.eval(0.0, 0.0);
        Nonlinearity { expr, source, nonnegative_at_zero: f0 >= 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_expr(Expr::Const(c), format!("{c}"))
    }

    /// `f(u) = u`.
    pub fn identity() -> Self {
        Self::from_expr(Expr::X, "u".into())
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.expr.eval(u, 0.0)
    }

    /// `f'(u)`.
    pub fn derivative(&self, u: f64) -> f64 {
        self.derivs(u, 1)[1]
    }

    /// `f^(k)(u)` for `k = 0..=order`.
    pub fn derivs(&self, u: f64, order: usize) -> Vec<f64> {
        let d = self.expr.derivs(u, 0.0, order);
        (0..=order).map(|k| d.get(k, 0)).collect()
    }

    /// The exact value when `f` is constant.
    pub fn constant_value(&self) -> Option<Rational> {
        if self.expr.is_constant() {
            rat_from_f64(self.expr.eval(0.0, 0.0))
        } else {
            None
        }
    }

    pub fn is_constant(&self) -> bool {
        self.expr.is_constant()
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn references_y(e: &Expr) -> bool {
    match e {
        Expr::Y | Expr::Dist(..) => true,
        Expr::Const(_) | Expr::X => false,
        Expr::Add(t) | Expr::Mul(t) => t.iter().any(references_y),
        Expr::Scale(_, e) | Expr::Pow(e, _) | Expr::Apply(_, e) => references_y(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_derivatives() {
        let f = Nonlinearity::parse("(exp u)").unwrap();
        let d = f.derivs(0.3, 4);
        for v in d {
            assert!((v - 0.3f64.exp()).abs() < 1e-14);
        }
        assert!(f.nonnegative_at_zero);
    }

    #[test]
    fn constant_is_exact() {
        let f = Nonlinearity::parse("1").unwrap();
        assert_eq!(f.constant_value(), Some(Rational::from_integer(1.into())));
        assert_eq!(f.derivative(2.0), 0.0);
        assert!(Nonlinearity::parse("(- 2)").unwrap().constant_value().is_some());
        assert!(!Nonlinearity::parse("(- 2)").unwrap().nonnegative_at_zero);
    }

    #[test]
    fn rejects_spatial_dependence() {
        assert!(Nonlinearity::parse("(+ u y)").is_err());
    }
}
