//! Smallest eigenvalues of `L = -Δ - f'(u)` by shifted block inverse iteration.
//!
//! The shift `σ = -max f'(u) - 1` lies below the whole spectrum, so the
//! eigenvalues of `L` closest to `σ` are the smallest ones and
//! `L - σ I` is an M-matrix that multigrid handles well. A block of `k + 2`
//! vectors is iterated; the two guard vectors speed up convergence of the
//! `k`-th value. Ritz values come from the projected matrix.

use nalgebra::DMatrix;
use serde::Serialize;

use super::linalg::{bicgstab, dot, max_abs, Multigrid};
use super::Discretization;
use crate::error::{Error, Result};
use crate::field::{GridField, Nonlinearity};

const MAX_ITER: usize = 200;
const REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Number of negative eigenvalues.
    pub morse_index: usize,
    /// `λ1 >= 0`.
    pub semi_stable: bool,
    pub iterations: usize,
}

/// Spectrum on the plain five-point operator of the grid's own mask.
pub fn linearized_spectrum(u: &GridField, f: &Nonlinearity, k: usize) -> Result<SpectrumResult> {
    let disc = Discretization::from_mask(u)?;
    let values = disc.unknowns_of(u)?;
    spectrum_on(&disc, &values, f, k)
}

pub(crate) fn spectrum_on(disc: &Discretization, u: &[f64], f: &Nonlinearity, k: usize) -> Result<SpectrumResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let n = disc.len();
    let b = (k + 2).min(n);
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {n} unknowns")));
    }
    let fp: Vec<f64> = u.iter().map(|&v| f.derivative(v)).collect();
    let sigma = -fp.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0;
    let l_op = disc.a.add_diag(&fp.iter().map(|d| -d).collect::<Vec<_>>());
    let shifted = l_op.add_diag(&vec![-sigma; n]);
    let mg = Multigrid::new(&shifted, &disc.lattice())?;

    // deterministic, smooth-plus-oscillatory start block
    let mut v: Vec<Vec<f64>> = (0..b)
        .map(|c| (0..n).map(|i| 1.0 + ((i * (c + 1)) as f64 * 0.7548776662).sin() * (c as f64 + 0.5)).collect())
        .collect();
    orthonormalize(&mut v);
    let mut prev: Option<Vec<f64>> = None;
    for it in 1..=MAX_ITER {
        let mut w = Vec::with_capacity(b);
        for col in &v {
            let tol = 1e-10 * max_abs(col);
            w.push(bicgstab(&shifted, &mg, col, Some(col), tol, 300)?);
        }
        orthonormalize(&mut w);
        v = w;
        let ritz = ritz_values(&l_op, &v);
        let cur: Vec<f64> = ritz[..k].to_vec();
        if let Some(p) = &prev {
            let done = cur.iter().zip(p).all(|(a, b)| (a - b).abs() <= REL_TOL * a.abs().max(1.0));
            if done {
                let morse_index = cur.iter().filter(|&&l| l < 0.0).count();
                return Ok(SpectrumResult { semi_stable: cur[0] >= 0.0, morse_index, eigenvalues: cur, iterations: it });
            }
        }
        prev = Some(cur);
    }
    Err(Error::EigenIterationStalled { iterations: MAX_ITER })
}

/// Modified Gram-Schmidt, in place.
fn orthonormalize(v: &mut [Vec<f64>]) {
    for i in 0..v.len() {
        for j in 0..i {
            let (a, b) = v.split_at_mut(i);
            let c = dot(&b[0], &a[j]);
            for (x, y) in b[0].iter_mut().zip(&a[j]) {
                *x -= c * y;
            }
        }
        let nrm = dot(&v[i], &v[i]).sqrt();
        if nrm > 0.0 {
            v[i].iter_mut().for_each(|x| *x /= nrm);
        }
    }
}

/// Ascending real parts of the eigenvalues of `Vᵀ L V`.
fn ritz_values(l: &super::linalg::Csr, v: &[Vec<f64>]) -> Vec<f64> {
    let b = v.len();
    let n = l.n;
    let mut lv = vec![0.0; n];
    let mut h = DMatrix::zeros(b, b);
    for j in 0..b {
        l.matvec(&v[j], &mut lv);
        for i in 0..b {
            h[(i, j)] = dot(&v[i], &lv);
        }
    }
    let mut ev: Vec<f64> = h.complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::super::{solve_dirichlet, SolveConfig};
    use super::*;

    #[test]
    fn square_dirichlet_eigenvalues() {
        // exact discrete values: (4/h^2)(sin^2(pi h a/2) + sin^2(pi h b/2))
        let h = 1.0 / 32.0;
        let cfg = SolveConfig::unit_square(h, Nonlinearity::constant(0.0));
        let s = solve_dirichlet(&cfg, None).unwrap();
        let r = s.spectrum(2).unwrap();
        let mode = |a: f64, b: f64| {
            let q = |m: f64| (std::f64::consts::PI * h * m / 2.0).sin().powi(2);
            4.0 / (h * h) * (q(a) + q(b))
        };
        assert!((r.eigenvalues[0] - mode(1.0, 1.0)).abs() < 1e-7 * mode(1.0, 1.0));
        assert!((r.eigenvalues[1] - mode(1.0, 2.0)).abs() < 1e-6 * mode(1.0, 2.0));
        assert_eq!(r.morse_index, 0);
        assert!(r.semi_stable);
    }

    #[test]
    fn shift_by_linear_nonlinearity() {
        // f(u) = 30 u moves every eigenvalue down by 30
        let h = 1.0 / 16.0;
        let cfg = SolveConfig::unit_square(h, Nonlinearity::constant(0.0));
        let s = solve_dirichlet(&cfg, None).unwrap();
        let base = s.spectrum(1).unwrap().eigenvalues[0];
        let f = Nonlinearity::parse("(* 30 u)").unwrap();
        let r = linearized_spectrum(&s.field, &f, 1).unwrap();
        assert!((r.eigenvalues[0] - (base - 30.0)).abs() < 1e-6);
        assert_eq!(r.morse_index, 1);
        assert!(!r.semi_stable);
    }
}
