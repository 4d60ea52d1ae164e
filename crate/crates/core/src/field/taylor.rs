//! Truncated bivariate Taylor arithmetic.
//!
//! A [`Taylor2`] holds the Taylor coefficients `t(a, b) = ∂^{a+b}u/∂x^a∂y^b / (a! b!)`
//! of a function at a fixed point, for `a + b <= order`. Sums, products and
//! composition with univariate functions propagate these coefficients exactly
//! (up to rounding), which gives analytic partial derivatives of closed-form
//! fields without symbolic differentiation.

use std::ops::{Add, Mul, Neg, Sub};

/// Position of `(a, b)` in a triangular coefficient array.
#[inline]
pub(crate) fn tri_index(a: usize, b: usize) -> usize {
    let k = a + b;
    k * (k + 1) / 2 + b
}

#[inline]
pub(crate) fn tri_len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Partial derivatives `∂^{a+b}u/∂x^a∂y^b` at a point, `a + b <= order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivs {
    order: usize,
    d: Vec<f64>,
}

impl Derivs {
    pub fn zeros(order: usize) -> Self {
        Derivs { order, d: vec![0.0; tri_len(order)] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `∂^{a+b}u/∂x^a∂y^b`; zero above the stored order.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        if a + b > self.order {
            0.0
        } else {
            self.d[tri_index(a, b)]
        }
    }

    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        self.d[tri_index(a, b)] = v;
    }

    pub fn value(&self) -> f64 {
        self.get(0, 0)
    }

    pub fn gradient(&self) -> [f64; 2] {
        [self.get(1, 0), self.get(0, 1)]
    }

    /// `[u_xx, u_xy, u_yy]`.
    pub fn hessian(&self) -> [f64; 3] {
        [self.get(2, 0), self.get(1, 1), self.get(0, 2)]
    }

    pub fn laplacian(&self) -> f64 {
        self.get(2, 0) + self.get(0, 2)
    }
}

/// Truncated Taylor expansion of a bivariate function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Taylor2 {
    order: usize,
    t: Vec<f64>,
}

impl Taylor2 {
    pub fn constant(c: f64, order: usize) -> Self {
        let mut t = vec![0.0; tri_len(order)];
        t[0] = c;
        Taylor2 { order, t }
    }

    /// The coordinate function `x` expanded at `x0`.
    pub fn var_x(x0: f64, order: usize) -> Self {
        let mut s = Self::constant(x0, order);
        if order >= 1 {
            s.t[tri_index(1, 0)] = 1.0;
        }
        s
    }

    pub fn var_y(y0: f64, order: usize) -> Self {
        let mut s = Self::constant(y0, order);
        if order >= 1 {
            s.t[tri_index(0, 1)] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.t[0]
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.order {
            0.0
        } else {
            self.t[tri_index(a, b)]
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Taylor2 { order: self.order, t: self.t.iter().map(|v| v * s).collect() }
    }

    /// `g ∘ self`, where `g_derivs[k]` is the k-th derivative of `g` at `self.value()`.
    pub fn compose(&self, g_derivs: &[f64]) -> Self {
        let order = self.order;
        let mut delta = self.clone();
        delta.t[0] = 0.0;
        let mut out = Self::constant(g_derivs[0], order);
        let mut power = Self::constant(1.0, order);
        for (k, gk) in g_derivs.iter().enumerate().take(order + 1).skip(1) {
            power = &power * &delta;
            let c = gk / factorial(k);
            if c != 0.0 {
                for (o, p) in out.t.iter_mut().zip(&power.t) {
                    *o += c * p;
                }
            }
        }
        out
    }

    pub fn powi(&self, n: i32) -> Self {
        let v = self.value();
        let mut d = Vec::with_capacity(self.order + 1);
        let mut coef = 1.0;
        for k in 0..=self.order {
            let e = n - k as i32;
            if coef == 0.0 {
                d.push(0.0);
            } else {
                d.push(coef * v.powi(e));
            }
            coef *= e as f64;
        }
        self.compose(&d)
    }

    pub fn derivs(&self) -> Derivs {
        let mut out = Derivs::zeros(self.order);
        for k in 0..=self.order {
            for b in 0..=k {
                let a = k - b;
                out.set(a, b, self.t[tri_index(a, b)] * factorial(a) * factorial(b));
            }
        }
        out
    }

    /// Inverse of [`Taylor2::derivs`].
    pub fn from_derivs(d: &Derivs) -> Self {
        let order = d.order();
        let mut t = vec![0.0; tri_len(order)];
        for k in 0..=order {
            for b in 0..=k {
                let a = k - b;
                t[tri_index(a, b)] = d.get(a, b) / (factorial(a) * factorial(b));
            }
        }
        Taylor2 { order, t }
    }
}

impl Add for &Taylor2 {
    type Output = Taylor2;
    fn add(self, rhs: &Taylor2) -> Taylor2 {
        debug_assert_eq!(self.order, rhs.order);
        Taylor2 { order: self.order, t: self.t.iter().zip(&rhs.t).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Taylor2 {
    type Output = Taylor2;
    fn sub(self, rhs: &Taylor2) -> Taylor2 {
        debug_assert_eq!(self.order, rhs.order);
        Taylor2 { order: self.order, t: self.t.iter().zip(&rhs.t).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &Taylor2 {
    type Output = Taylor2;
    fn neg(self) -> Taylor2 {
        self.scale(-1.0)
    }
}

impl Mul for &Taylor2 {
    type Output = Taylor2;
    fn mul(self, rhs: &Taylor2) -> Taylor2 {
        debug_assert_eq!(self.order, rhs.order);
        let n = self.order;
        let mut out = vec![0.0; tri_len(n)];
        for k1 in 0..=n {
            for b1 in 0..=k1 {
                let l = self.t[tri_index(k1 - b1, b1)];
                if l == 0.0 {
                    continue;
                }
                for k2 in 0..=(n - k1) {
                    for b2 in 0..=k2 {
                        let r = rhs.t[tri_index(k2 - b2, b2)];
                        out[tri_index(k1 - b1 + k2 - b2, b1 + b2)] += l * r;
                    }
                }
            }
        }
        Taylor2 { order: n, t: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_coordinates() {
        let x = Taylor2::var_x(2.0, 3);
        let y = Taylor2::var_y(-1.0, 3);
        let p = &(&x * &x) * &y; // x^2 y
        let d = p.derivs();
        assert_eq!(d.value(), -4.0);
        assert_eq!(d.get(1, 0), -4.0);
        assert_eq!(d.get(0, 1), 4.0);
        assert_eq!(d.get(2, 1), 2.0);
        assert_eq!(d.get(1, 1), 4.0);
        assert_eq!(d.get(3, 0), 0.0);
    }

    #[test]
    fn exp_composition_matches_closed_form() {
        // exp(x + 2y) at (0.3, 0.1): every partial is exp(0.5) * 2^b
        let s = &Taylor2::var_x(0.3, 4) + &Taylor2::var_y(0.1, 4).scale(2.0);
        let e = 0.5f64.exp();
        let d = s.compose(&[e; 5]).derivs();
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                let expect = e * 2f64.powi(b as i32);
                assert!((d.get(a, b) - expect).abs() < 1e-13 * expect, "({a},{b})");
            }
        }
    }

    #[test]
    fn negative_power() {
        let x = Taylor2::var_x(2.0, 3);
        let d = x.powi(-1).derivs();
        assert!((d.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((d.get(1, 0) + 0.25).abs() < 1e-15);
        assert!((d.get(2, 0) - 0.25).abs() < 1e-15);
        assert!((d.get(3, 0) + 0.375).abs() < 1e-15);
    }
}
