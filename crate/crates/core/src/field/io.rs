//! Text file format for fields.
//!
//! ```text
//! FIELD poly          FIELD expr                    FIELD grid
//! 4 0 -1              (cos y)                       GRID2D nx ny x0 y0 hx hy
//! 0 2 -1/2            BOUNDS xmin xmax ymin ymax    v00 v10 ... (row-major, nan = exterior)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. The `BOUNDS` line of
//! an expression file is optional.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::expr::Expr;
use super::grid::GridField;
use super::poly2::{rat_from_f64, Poly2, Rational};
use super::{FieldExpr, Rect, ScalarField};
use crate::error::{Error, Result};

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_rational(tok: &str) -> Option<Rational> {
    if let Ok(r) = Rational::from_str(tok) {
        return Some(r);
    }
    tok.parse::<f64>().ok().and_then(rat_from_f64)
}

pub fn parse_field(text: &str) -> Result<ScalarField> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty field file"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("FIELD") {
        return Err(perr(hl, "expected 'FIELD <kind>' header"));
    }
    let kind = head.next().ok_or_else(|| perr(hl, "missing field kind"))?;
    if head.next().is_some() {
        return Err(perr(hl, "unexpected tokens after field kind"));
    }
    match kind {
        "poly" => {
            let mut p = Poly2::zero();
            for (ln, l) in lines {
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(perr(ln, "expected 'a b num/den'"));
                }
                let a: u32 = t[0].parse().map_err(|_| perr(ln, format!("bad exponent '{}'", t[0])))?;
                let b: u32 = t[1].parse().map_err(|_| perr(ln, format!("bad exponent '{}'", t[1])))?;
                let c = parse_rational(t[2]).ok_or_else(|| perr(ln, format!("bad coefficient '{}'", t[2])))?;
                p = &p + &Poly2::monomial(a, b, c);
            }
            Ok(ScalarField::Poly(p))
        }
        "expr" => {
            let (ln, src) = lines.next().ok_or_else(|| perr(hl + 1, "missing expression line"))?;
            let expr = Expr::parse(src).map_err(|e| match e {
                Error::Parse { message, .. } => perr(ln, message),
                other => other,
            })?;
            let mut bounds = None;
            if let Some((bl, l)) = lines.next() {
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 5 || t[0] != "BOUNDS" {
                    return Err(perr(bl, "expected 'BOUNDS xmin xmax ymin ymax'"));
                }
                let v = parse_floats(&t[1..], bl)?;
                if !(v[0] < v[1] && v[2] < v[3]) {
                    return Err(perr(bl, "empty bounds"));
                }
                bounds = Some(Rect::new(v[0], v[1], v[2], v[3]));
            }
            if let Some((ln, _)) = lines.next() {
                return Err(perr(ln, "trailing content after expression"));
            }
            Ok(ScalarField::Expr(FieldExpr { expr, bounds }))
        }
        "grid" => {
            let (gl, g) = lines.next().ok_or_else(|| perr(hl + 1, "missing GRID2D line"))?;
            let t: Vec<&str> = g.split_whitespace().collect();
            if t.len() != 7 || t[0] != "GRID2D" {
                return Err(perr(gl, "expected 'GRID2D nx ny x0 y0 hx hy'"));
            }
            let nx: usize = t[1].parse().map_err(|_| perr(gl, "bad nx"))?;
            let ny: usize = t[2].parse().map_err(|_| perr(gl, "bad ny"))?;
            let v = parse_floats(&t[3..], gl)?;
            let mut values = Vec::with_capacity(nx * ny);
            let mut last = gl;
            for (ln, l) in lines {
                last = ln;
                for tok in l.split_whitespace() {
                    values.push(parse_value(tok).ok_or_else(|| perr(ln, format!("bad value '{tok}'")))?);
                }
            }
            if values.len() != nx * ny {
                return Err(perr(last, format!("expected {} values, found {}", nx * ny, values.len())));
            }
            GridField::from_values(nx, ny, (v[0], v[1]), (v[2], v[3]), values)
                .map(ScalarField::Grid)
                .map_err(|e| perr(gl, e.to_string()))
        }
        other => Err(perr(hl, format!("unknown field kind '{other}'"))),
    }
}

fn parse_value(tok: &str) -> Option<f64> {
    if tok.eq_ignore_ascii_case("nan") {
        Some(f64::NAN)
    } else {
        tok.parse::<f64>().ok().filter(|v| v.is_finite())
    }
}

fn parse_floats(toks: &[&str], line: usize) -> Result<Vec<f64>> {
    toks.iter()
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| perr(line, format!("bad number '{t}'"))))
        .collect()
}

pub fn write_field(field: &ScalarField) -> String {
    let mut s = String::new();
    match field {
        ScalarField::Poly(p) => {
            s.push_str("FIELD poly\n");
            for (a, b, c) in p.terms() {
                let _ = writeln!(s, "{a} {b} {c}");
            }
        }
        ScalarField::Expr(e) => {
            let _ = writeln!(s, "FIELD expr\n{}", e.expr);
            if let Some(b) = e.bounds {
                let _ = writeln!(
                    s,
                    "BOUNDS {} {} {} {}",
                    fmt_f64(b.xmin),
                    fmt_f64(b.xmax),
                    fmt_f64(b.ymin),
                    fmt_f64(b.ymax)
                );
            }
        }
        ScalarField::Grid(g) => {
            s.push_str("FIELD grid\n");
            let _ = writeln!(
                s,
                "GRID2D {} {} {} {} {} {}",
                g.nx,
                g.ny,
                fmt_f64(g.x0),
                fmt_f64(g.y0),
                fmt_f64(g.hx),
                fmt_f64(g.hy)
            );
            for row in g.values().chunks(g.nx) {
                let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
        }
    }
    s
}

pub fn read_field_file(path: &Path) -> Result<ScalarField> {
    parse_field(&std::fs::read_to_string(path)?)
}

pub fn write_field_file(path: &Path, field: &ScalarField) -> Result<()> {
    std::fs::write(path, write_field(field))?;
    Ok(())
}
