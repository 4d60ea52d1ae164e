//! Bessel functions of the first kind of integer order.

use std::f64::consts::PI;

/// `J_n(x)` for integer `n >= 0`.
///
/// Power series for `|x| <= 8`, trapezoidal quadrature of the integral
/// representation beyond (exponentially convergent for periodic integrands).
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let v = bessel_j(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x.abs() <= 8.0 {
        series(n as u32, x)
    } else {
        integral(n, x)
    }
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    for m in 1..200u32 {
        term *= q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn integral(n: i32, x: f64) -> f64 {
    let m = (2.0 * (x.abs() + n as f64) + 64.0) as usize;
    let h = PI / m as f64;
    let mut s = 0.0;
    for k in 0..=m {
        let t = k as f64 * h;
        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
        s += w * (n as f64 * t - x * t.sin()).cos();
    }
    s * h / PI
}

/// `d^k/dx^k J_0(x)` for `k = 0..=order`, from `J_n' = (J_{n-1} - J_{n+1}) / 2`.
pub fn bessel_j0_derivs(x: f64, order: usize) -> Vec<f64> {
    let jn: Vec<f64> = (0..=order as i32).map(|n| bessel_j(n, x)).collect();
    let j = |n: i32| -> f64 {
        let v = jn[n.unsigned_abs() as usize];
        if n < 0 && n % 2 != 0 {
            -v
        } else {
            v
        }
    };
    (0..=order)
        .map(|k| {
            // J0^(k) = 2^-k Σ_m (-1)^m C(k, m) J_{2m-k}
            let mut s = 0.0;
            let mut c = 1.0;
            for m in 0..=k {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * c * j(2 * m as i32 - k as i32);
                c = c * (k - m) as f64 / (m + 1) as f64;
            }
            s / 2f64.powi(k as i32)
        })
        .collect()
}

/// First positive zero of `J_1`.
pub fn j1_first_zero() -> f64 {
    let mut x = 3.8317;
    for _ in 0..50 {
        let f = bessel_j(1, x);
        let df = 0.5 * (bessel_j(0, x) - bessel_j(2, x));
        let step = f / df;
        x -= step;
        if step.abs() < 1e-16 * x {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_quadrature_agree() {
        for &x in &[0.5, 3.0, 7.5, 8.0] {
            for n in 0..5 {
                let a = series(n as u32, x);
                let b = integral(n, x);
                assert!((a - b).abs() < 1e-13, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn known_values() {
        assert!((bessel_j(0, 0.0) - 1.0).abs() < 1e-16);
        // J0(1) and J1(1) to 16 digits
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j1_first_zero() - 3.831_705_970_207_512).abs() < 1e-13);
    }

    #[test]
    fn derivatives_satisfy_bessel_equation() {
        // x J0'' + J0' + x J0 = 0 and its derivative
        for &x in &[1.3, 3.8, 5.0] {
            let d = bessel_j0_derivs(x, 4);
            let r = x * d[2] + d[1] + x * d[0];
            assert!(r.abs() < 1e-14, "{x} {r}");
            assert!((x * d[3] + 2.0 * d[2] + x * d[1] + d[0]).abs() < 1e-13);
            assert!((d[1] + bessel_j(1, x)).abs() < 1e-15);
        }
    }
}
