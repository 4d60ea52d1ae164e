//! Closed-form fields as expression trees in prefix notation.
//!
//! Grammar (whitespace separated, one expression per line in field files):
//!
//! ```text
//! expr := number | x | y | u | pi
//!       | (+ expr...) | (* expr...) | (- expr) | (- expr expr) | (/ expr expr)
//!       | (^ expr int) | (exp expr) | (log expr) | (sin expr) | (cos expr)
//!       | (sqrt expr) | (j0 expr) | (dist cx cy)
//! ```
//!
//! `(dist cx cy)` is the distance to `(cx, cy)`, so a radial profile `g(r)` is
//! written `(g (dist cx cy))`. `u` is an alias of `x`, used by nonlinearities.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::special::bessel_j0_derivs;
use super::taylor::{Derivs, Taylor2};
use crate::error::{Error, Result};

/// Univariate functions with derivative rules of every order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    BesselJ0,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::BesselJ0 => "j0",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "j0" => Func::BesselJ0,
            _ => return None,
        })
    }

    /// `g^(k)(t)` for `k = 0..=order`.
    pub fn derivs(self, t: f64, order: usize) -> Vec<f64> {
        match self {
            Func::Exp => vec![t.exp(); order + 1],
            Func::Sin | Func::Cos => {
                let (s, c) = t.sin_cos();
                let cycle = [s, c, -s, -c];
                let start = if self == Func::Sin { 0 } else { 1 };
                (0..=order).map(|k| cycle[(start + k) % 4]).collect()
            }
            Func::Log => {
                let mut out = vec![t.ln()];
                // d^k ln t = (-1)^{k-1} (k-1)! / t^k
                let mut f = 1.0;
                for k in 1..=order {
                    if k > 1 {
                        f *= -((k - 1) as f64);
                    }
                    out.push(f / t.powi(k as i32));
                }
                out
            }
            Func::Sqrt => {
                let mut out = Vec::with_capacity(order + 1);
                let mut coef = 1.0;
                for k in 0..=order {
                    out.push(coef * t.powf(0.5 - k as f64));
                    coef *= 0.5 - k as f64;
                }
                out
            }
            Func::BesselJ0 => bessel_j0_derivs(t, order),
        }
    }
}

/// Expression tree over the coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    Y,
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Scale(f64, Box<Expr>),
    Pow(Box<Expr>, i32),
    Apply(Func, Box<Expr>),
    /// Euclidean distance to a fixed center.
    Dist(f64, f64),
}

impl Expr {
    pub fn taylor(&self, x: f64, y: f64, order: usize) -> Taylor2 {
        match self {
            Expr::Const(c) => Taylor2::constant(*c, order),
            Expr::X => Taylor2::var_x(x, order),
            Expr::Y => Taylor2::var_y(y, order),
            Expr::Add(terms) => terms
                .iter()
                .fold(Taylor2::constant(0.0, order), |acc, t| &acc + &t.taylor(x, y, order)),
            Expr::Mul(terms) => terms
                .iter()
                .fold(Taylor2::constant(1.0, order), |acc, t| &acc * &t.taylor(x, y, order)),
            Expr::Scale(s, e) => e.taylor(x, y, order).scale(*s),
            Expr::Pow(e, n) => e.taylor(x, y, order).powi(*n),
            Expr::Apply(f, e) => {
                let inner = e.taylor(x, y, order);
                inner.compose(&f.derivs(inner.value(), order))
            }
            Expr::Dist(cx, cy) => {
                let dx = Taylor2::var_x(x - cx, order);
                let dy = Taylor2::var_y(y - cy, order);
                let r2 = &(&dx * &dx) + &(&dy * &dy);
                r2.compose(&Func::Sqrt.derivs(r2.value(), order))
            }
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X => x,
            Expr::Y => y,
            Expr::Add(t) => t.iter().map(|e| e.eval(x, y)).sum(),
            Expr::Mul(t) => t.iter().map(|e| e.eval(x, y)).product(),
            Expr::Scale(s, e) => s * e.eval(x, y),
            Expr::Pow(e, n) => e.eval(x, y).powi(*n),
            Expr::Apply(f, e) => f.derivs(e.eval(x, y), 0)[0],
            Expr::Dist(cx, cy) => (x - cx).hypot(y - cy),
        }
    }

    pub fn derivs(&self, x: f64, y: f64, order: usize) -> Derivs {
        self.taylor(x, y, order).derivs()
    }

    /// True when the expression does not reference the coordinates.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::X | Expr::Y | Expr::Dist(..) => false,
            Expr::Add(t) | Expr::Mul(t) => t.iter().all(Expr::is_constant),
            Expr::Scale(_, e) | Expr::Pow(e, _) | Expr::Apply(_, e) => e.is_constant(),
        }
    }

    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src);
        let mut pos = 0;
        let e = parse_tokens(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(parse_err(format!("trailing input after expression: '{}'", tokens[pos])));
        }
        Ok(e)
    }
}

fn parse_err(message: String) -> Error {
    Error::Parse { line: 1, message }
}

fn tokenize(src: &str) -> Vec<String> {
    src.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(str::to_owned).collect()
}

fn parse_tokens(tokens: &[String], pos: &mut usize) -> Result<Expr> {
    let tok = tokens.get(*pos).ok_or_else(|| parse_err("unexpected end of expression".into()))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let head = tokens
                .get(*pos)
                .ok_or_else(|| parse_err("unexpected end after '('".into()))?
                .clone();
            *pos += 1;
            let e = if head == "dist" {
                let cx = parse_number(tokens, pos)?;
                let cy = parse_number(tokens, pos)?;
                Expr::Dist(cx, cy)
            } else if head == "^" {
                let base = parse_tokens(tokens, pos)?;
                let n = parse_number(tokens, pos)?;
                if n.fract() != 0.0 || n.abs() > i32::MAX as f64 {
                    return Err(parse_err(format!("exponent must be an integer, got {n}")));
                }
                Expr::Pow(Box::new(base), n as i32)
            } else {
                let mut args = Vec::new();
                while tokens.get(*pos).map(String::as_str) != Some(")") {
                    if *pos >= tokens.len() {
                        return Err(parse_err("missing ')'".into()));
                    }
                    args.push(parse_tokens(tokens, pos)?);
                }
                build(&head, args)?
            };
            match tokens.get(*pos).map(String::as_str) {
                Some(")") => {
                    *pos += 1;
                    Ok(e)
                }
                _ => Err(parse_err(format!("expected ')' after '{head}' form"))),
            }
        }
        ")" => Err(parse_err("unexpected ')'".into())),
        "x" | "u" => Ok(Expr::X),
        "y" => Ok(Expr::Y),
        "pi" => Ok(Expr::Const(std::f64::consts::PI)),
        other => other
            .parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| parse_err(format!("unknown atom '{other}'"))),
    }
}

fn parse_number(tokens: &[String], pos: &mut usize) -> Result<f64> {
    match parse_tokens(tokens, pos)? {
        Expr::Const(c) => Ok(c),
        Expr::Scale(s, e) => match *e {
            Expr::Const(c) => Ok(s * c),
            _ => Err(parse_err("expected a number".into())),
        },
        _ => Err(parse_err("expected a number".into())),
    }
}

fn build(head: &str, mut args: Vec<Expr>) -> Result<Expr> {
    let arity = |n: usize, args: &Vec<Expr>| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(parse_err(format!("'{head}' takes {n} argument(s), got {}", args.len())))
        }
    };
    Ok(match head {
        "+" => Expr::Add(args),
        "*" => match args.as_slice() {
            [Expr::Const(c), e] => Expr::Scale(*c, Box::new(e.clone())),
            _ => Expr::Mul(args),
        },
        "-" => match args.len() {
            1 => Expr::Scale(-1.0, Box::new(args.remove(0))),
            2 => {
                let b = args.pop().unwrap();
                let a = args.pop().unwrap();
                Expr::Add(vec![a, Expr::Scale(-1.0, Box::new(b))])
            }
            n => return Err(parse_err(format!("'-' takes 1 or 2 arguments, got {n}"))),
        },
        "/" => {
            arity(2, &args)?;
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            let inv = Expr::Pow(Box::new(b), -1);
            match a {
                Expr::Const(c) => Expr::Scale(c, Box::new(inv)),
                a => Expr::Mul(vec![a, inv]),
            }
        }
        name => {
            let f = Func::from_name(name)
                .ok_or_else(|| parse_err(format!("unknown function '{name}'")))?;
            arity(1, &args)?;
            Expr::Apply(f, Box::new(args.remove(0)))
        }
    })
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Add(t) | Expr::Mul(t) => {
                write!(f, "({}", if matches!(self, Expr::Add(_)) { "+" } else { "*" })?;
                for e in t {
                    write!(f, " {e}")?;
                }
                write!(f, ")")
            }
            Expr::Scale(s, e) => write!(f, "(* {s:?} {e})"),
            Expr::Pow(e, n) => write!(f, "(^ {e} {n})"),
            Expr::Apply(func, e) => write!(f, "({} {e})", func.name()),
            Expr::Dist(cx, cy) => write!(f, "(dist {cx:?} {cy:?})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_evaluate() {
        let e = Expr::parse("(+ 1 (* -1 (^ x 2)) (- y))").unwrap();
        assert_eq!(e.eval(2.0, 3.0), 1.0 - 4.0 - 3.0);
        let d = Expr::parse("(dist 3 4)").unwrap();
        assert_eq!(d.eval(0.0, 0.0), 5.0);
        assert_eq!(Expr::parse("u").unwrap(), Expr::X);
        assert_eq!(Expr::parse("1").unwrap(), Expr::Const(1.0));
    }

    #[test]
    fn parse_errors() {
        for bad in ["(+ 1 2", "(foo x)", "(^ x 1.5)", ")", "(exp x y)", "x y", "(dist x 1)"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for src in ["(cos y)", "(j0 (dist 0.0 3.8317059702075125))", "(/ (exp u) (+ 1 x))", "(- x y)"] {
            let e = Expr::parse(src).unwrap();
            assert_eq!(Expr::parse(&e.to_string()).unwrap(), e);
        }
    }

    #[test]
    fn cosine_derivatives() {
        let e = Expr::parse("(cos y)").unwrap();
        let d = e.derivs(0.7, 0.0, 6);
        let expect = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
        for (b, v) in expect.iter().enumerate() {
            assert!((d.get(0, b) - v).abs() < 1e-15);
            if b > 0 {
                assert_eq!(d.get(1, b - 1), 0.0);
            }
        }
    }

    #[test]
    fn radial_second_derivatives() {
        // r = |(x, y) - (0, 2)| at the origin: r_xx = 1/r, r_yy = 0, r_y = -1
        let d = Expr::Dist(0.0, 2.0).derivs(0.0, 0.0, 2);
        assert!((d.get(0, 1) + 1.0).abs() < 1e-15);
        assert!((d.get(2, 0) - 0.5).abs() < 1e-15);
        assert!(d.get(0, 2).abs() < 1e-15);
    }
}
