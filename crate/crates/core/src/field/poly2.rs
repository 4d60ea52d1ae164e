//! Bivariate polynomials with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::taylor::{Derivs, Taylor2};
use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational value of a finite `f64`.
pub fn rat_from_f64(v: f64) -> Option<Rational> {
    BigRational::from_float(v)
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Square root of a rational when it is itself rational.
pub fn rat_sqrt_exact(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

/// Best rational approximation of `v` with denominator at most `max_den`
/// (continued-fraction convergents).
pub fn rat_approx(v: f64, max_den: i64) -> Option<Rational> {
    if !v.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut x = v;
    for _ in 0..64 {
        let a = x.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = x - a;
        if frac.abs() < 1e-300 {
            break;
        }
        x = 1.0 / frac;
        if (h1 as f64 / k1 as f64 - v).abs() <= 1e-15 * v.abs().max(1e-300) {
            break;
        }
    }
    if k1 == 0 {
        return None;
    }
    Some(BigRational::new(BigInt::from(h1), BigInt::from(k1)))
}

/// Which part of `z^n = (x + iy)^n` to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicPart {
    Real,
    Imaginary,
}

/// A polynomial `Σ c_ab x^a y^b` with exact rational coefficients.
///
/// Only nonzero coefficients are stored; `f64` copies are cached for fast
/// floating-point evaluation.
#[derive(Clone)]
pub struct Poly2 {
    coeffs: BTreeMap<(u32, u32), Rational>,
    approx: Vec<(u32, u32, f64)>,
}

impl PartialEq for Poly2 {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl Eq for Poly2 {}

impl fmt::Debug for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly2({self})")
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(a, b), c) in self.coeffs.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            match a {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{a}")?,
            }
            match b {
                0 => {}
                1 => write!(f, "y")?,
                _ => write!(f, "y^{b}")?,
            }
        }
        Ok(())
    }
}

impl Poly2 {
    fn from_map(mut coeffs: BTreeMap<(u32, u32), Rational>) -> Self {
        coeffs.retain(|_, c| !c.is_zero());
        let approx = coeffs.iter().map(|(&(a, b), c)| (a, b, rat_to_f64(c))).collect();
        Poly2 { coeffs, approx }
    }

    pub fn zero() -> Self {
        Self::from_map(BTreeMap::new())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, Rational::one())
    }

    pub fn y() -> Self {
        Self::monomial(0, 1, Rational::one())
    }

    pub fn monomial(a: u32, b: u32, c: Rational) -> Self {
        let mut m = BTreeMap::new();
        m.insert((a, b), c);
        Self::from_map(m)
    }

    /// Builds a polynomial from `(a, b, coefficient)` terms; repeated exponents add up.
    pub fn from_terms<I: IntoIterator<Item = (u32, u32, Rational)>>(terms: I) -> Self {
        let mut m: BTreeMap<(u32, u32), Rational> = BTreeMap::new();
        for (a, b, c) in terms {
            *m.entry((a, b)).or_insert_with(Rational::zero) += c;
        }
        Self::from_map(m)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs.keys().map(|&(a, b)| (a + b) as usize).max().unwrap_or(0)
    }

    pub fn coeff(&self, a: u32, b: u32) -> Rational {
        self.coeffs.get(&(a, b)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &Rational)> {
        self.coeffs.iter().map(|(&(a, b), c)| (a, b, c))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        Self::from_map(self.coeffs.iter().map(|(k, c)| (*k, c * s)).collect())
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(Rational::one());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// `∂^{a+b}p/∂x^a∂y^b`.
    pub fn derivative(&self, a: u32, b: u32) -> Self {
        let mut m = BTreeMap::new();
        for (&(i, j), c) in &self.coeffs {
            if i < a || j < b {
                continue;
            }
            let mut f = BigInt::one();
            for t in 0..a {
                f *= BigInt::from(i - t);
            }
            for t in 0..b {
                f *= BigInt::from(j - t);
            }
            m.insert((i - a, j - b), c * BigRational::from_integer(f));
        }
        Self::from_map(m)
    }

    pub fn laplacian(&self) -> Self {
        &self.derivative(2, 0) + &self.derivative(0, 2)
    }

    pub fn eval_exact(&self, x: &Rational, y: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for (&(a, b), c) in &self.coeffs {
            acc += c * pow_rat(x, a) * pow_rat(y, b);
        }
        acc
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let deg = self.degree();
        let mut xp = vec![1.0; deg + 1];
        let mut yp = vec![1.0; deg + 1];
        for k in 1..=deg {
            xp[k] = xp[k - 1] * x;
            yp[k] = yp[k - 1] * y;
        }
        self.approx.iter().map(|&(a, b, c)| c * xp[a as usize] * yp[b as usize]).sum()
    }

    /// Floating-point partial derivatives at `(x, y)` up to `order`.
    pub fn derivs(&self, x: f64, y: f64, order: usize) -> Derivs {
        let tx = Taylor2::var_x(x, order);
        let ty = Taylor2::var_y(y, order);
        let deg = self.degree();
        let mut xp = vec![Taylor2::constant(1.0, order)];
        let mut yp = vec![Taylor2::constant(1.0, order)];
        for k in 1..=deg {
            xp.push(&xp[k - 1] * &tx);
            yp.push(&yp[k - 1] * &ty);
        }
        let mut acc = Taylor2::constant(0.0, order);
        for &(a, b, c) in &self.approx {
            let term = (&xp[a as usize] * &yp[b as usize]).scale(c);
            acc = &acc + &term;
        }
        acc.derivs()
    }

    /// Substitutes `x -> m00 X + m01 Y + sx`, `y -> m10 X + m11 Y + sy`.
    pub fn compose_affine(&self, m: [[&Rational; 2]; 2], shift: [&Rational; 2]) -> Self {
        let xs = Self::from_terms([
            (1, 0, m[0][0].clone()),
            (0, 1, m[0][1].clone()),
            (0, 0, shift[0].clone()),
        ]);
        let ys = Self::from_terms([
            (1, 0, m[1][0].clone()),
            (0, 1, m[1][1].clone()),
            (0, 0, shift[1].clone()),
        ]);
        let deg = self.degree() as u32;
        let xpow: Vec<Poly2> = (0..=deg).map(|k| xs.pow(k)).collect();
        let ypow: Vec<Poly2> = (0..=deg).map(|k| ys.pow(k)).collect();
        let mut acc = Self::zero();
        for (&(a, b), c) in &self.coeffs {
            acc = &acc + &(&xpow[a as usize] * &ypow[b as usize]).scale(c);
        }
        acc
    }

    /// `p(c x - s y, s x + c y)`: the field pre-composed with the rotation by
    /// the angle whose cosine and sine are `(c, s)`.
    pub fn rotate(&self, c: &Rational, s: &Rational) -> Self {
        let ms = -s.clone();
        let z = Rational::zero();
        self.compose_affine([[c, &ms], [s, c]], [&z, &z])
    }

    /// `Re(z^n)` or `Im(z^n)` with `z = x + iy`.
    pub fn harmonic_basis(n: u32, part: HarmonicPart) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("harmonic degree must be at least 1".into()));
        }
        let mut terms = Vec::new();
        for k in 0..=n {
            // i^k x^{n-k} y^k: real for even k, imaginary for odd k
            let even = k % 2 == 0;
            let take = match part {
                HarmonicPart::Real => even,
                HarmonicPart::Imaginary => !even,
            };
            if !take {
                continue;
            }
            let sign = if (k / 2) % 2 == 0 { 1 } else { -1 };
            let c = binomial(n, k) * BigInt::from(sign);
            terms.push((n - k, k, BigRational::from_integer(c)));
        }
        Ok(Self::from_terms(terms))
    }
}

fn pow_rat(r: &Rational, k: u32) -> Rational {
    let mut out = Rational::one();
    for _ in 0..k {
        out *= r;
    }
    out
}

pub(crate) fn binomial(n: u32, k: u32) -> BigInt {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for t in 0..k {
        num *= BigInt::from(n - t);
        den *= BigInt::from(t + 1);
    }
    num.div_floor(&den)
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        let mut m = self.coeffs.clone();
        for (k, c) in &rhs.coeffs {
            *m.entry(*k).or_insert_with(Rational::zero) += c;
        }
        Poly2::from_map(m)
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        self + &(-rhs)
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        Poly2::from_map(self.coeffs.iter().map(|(k, c)| (*k, -c)).collect())
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        let mut m: BTreeMap<(u32, u32), Rational> = BTreeMap::new();
        for (&(a1, b1), c1) in &self.coeffs {
            for (&(a2, b2), c2) in &rhs.coeffs {
                *m.entry((a1 + a2, b1 + b2)).or_insert_with(Rational::zero) += c1 * c2;
            }
        }
        Poly2::from_map(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_rat() -> impl Strategy<Value = Rational> {
        (-50i64..50, 1i64..20).prop_map(|(n, d)| rat(n, d))
    }

    fn arb_poly() -> impl Strategy<Value = Poly2> {
        proptest::collection::vec((0u32..4, 0u32..4, arb_rat()), 0..6).prop_map(Poly2::from_terms)
    }

    #[test]
    fn re_z3_at_one_one() {
        let p = Poly2::harmonic_basis(3, HarmonicPart::Real).unwrap();
        assert_eq!(p.eval_exact(&rat_int(1), &rat_int(1)), rat_int(-2));
        assert_eq!(p.eval(1.0, 1.0), -2.0);
    }

    #[test]
    fn harmonic_basis_examples() {
        let re3 = Poly2::from_terms([(3, 0, rat_int(1)), (1, 2, rat_int(-3))]);
        assert_eq!(Poly2::harmonic_basis(3, HarmonicPart::Real).unwrap(), re3);
        let re4 = Poly2::from_terms([(4, 0, rat_int(1)), (2, 2, rat_int(-6)), (0, 4, rat_int(1))]);
        assert_eq!(Poly2::harmonic_basis(4, HarmonicPart::Real).unwrap(), re4);
        let im3 = Poly2::from_terms([(2, 1, rat_int(3)), (0, 3, rat_int(-1))]);
        assert_eq!(Poly2::harmonic_basis(3, HarmonicPart::Imaginary).unwrap(), im3);
        assert!(Poly2::harmonic_basis(0, HarmonicPart::Real).is_err());
    }

    #[test]
    fn harmonic_basis_is_harmonic() {
        for n in 1..=8 {
            for part in [HarmonicPart::Real, HarmonicPart::Imaginary] {
                assert!(Poly2::harmonic_basis(n, part).unwrap().laplacian().is_zero());
            }
        }
    }

    #[test]
    fn zero_coefficients_are_dropped() {
        let p = Poly2::from_terms([(2, 0, rat_int(1)), (2, 0, rat_int(-1)), (0, 1, rat_int(3))]);
        assert_eq!(p.degree(), 1);
        assert_eq!(p.terms().count(), 1);
        assert_eq!(Poly2::zero().degree(), 0);
    }

    #[test]
    fn exact_sqrt_and_approximation() {
        assert_eq!(rat_sqrt_exact(&rat(9, 25)), Some(rat(3, 5)));
        assert_eq!(rat_sqrt_exact(&rat(2, 1)), None);
        assert_eq!(rat_approx(-1.0 / 24.0, 10_000), Some(rat(-1, 24)));
        assert_eq!(rat_approx(0.0, 10), Some(rat_int(0)));
    }

    #[test]
    fn rotation_by_quarter_turn() {
        // x^2 y rotated by 90 degrees: (-y)^2 x
        let p = Poly2::monomial(2, 1, rat_int(1));
        let r = p.rotate(&rat_int(0), &rat_int(1));
        assert_eq!(r, Poly2::monomial(1, 2, rat_int(1)));
    }

    proptest! {
        #[test]
        fn arithmetic_commutes_with_evaluation(
            p in arb_poly(), q in arb_poly(), s in arb_rat(), x in arb_rat(), y in arb_rat()
        ) {
            let ev = |r: &Poly2| r.eval_exact(&x, &y);
            prop_assert_eq!(ev(&(&p + &q)), ev(&p) + ev(&q));
            prop_assert_eq!(ev(&(&p * &q)), ev(&p) * ev(&q));
            prop_assert_eq!(ev(&p.scale(&s)), ev(&p) * &s);
            // derivative against the exact difference quotient of a polynomial in t:
            // d/dx p(x, y) = coefficient of t in p(x + t, y)
            let one = rat_int(1);
            let z = rat_int(0);
            let shifted = p.compose_affine([[&one, &z], [&z, &one]], [&x, &y]);
            prop_assert_eq!(ev(&p.derivative(1, 0)), shifted.coeff(1, 0));
            prop_assert_eq!(ev(&p.derivative(0, 1)), shifted.coeff(0, 1));
        }

        #[test]
        fn float_derivs_agree_with_exact(p in arb_poly(), x in arb_rat(), y in arb_rat()) {
            let d = p.derivs(rat_to_f64(&x), rat_to_f64(&y), 3);
            for a in 0..=3u32 {
                for b in 0..=(3 - a) {
                    let exact = rat_to_f64(&p.derivative(a, b).eval_exact(&x, &y));
                    let got = d.get(a as usize, b as usize);
                    prop_assert!((exact - got).abs() <= 1e-9 * (1.0 + exact.abs()));
                }
            }
        }
    }
}
