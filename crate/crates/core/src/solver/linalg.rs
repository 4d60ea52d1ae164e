//! Sparse kernels, a geometric multigrid preconditioner and BiCGSTAB.
//!
//! Matrix-vector products parallelize over rows and dot products reduce
//! fixed-size chunks in index order, so results are bitwise identical for
//! every thread count. Smoothing is sequential Gauss-Seidel.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

const CHUNK: usize = 4096;
const COARSEST: usize = 400;

/// Compressed sparse rows with the diagonal cached.
#[derive(Clone, Debug)]
pub struct Csr {
    pub n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
    diag: Vec<f64>,
}

impl Csr {
    pub fn from_sprs(m: &CsMat<f64>) -> Self {
        let m = if m.is_csr() { m.clone() } else { m.to_csr() };
        let n = m.rows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(m.nnz());
        let mut data = Vec::with_capacity(m.nnz());
        let mut diag = vec![0.0; n];
        indptr.push(0);
        for (i, row) in m.outer_iterator().enumerate() {
            let mut entries: Vec<(usize, f64)> = row.iter().map(|(j, &v)| (j, v)).collect();
            entries.sort_by_key(|e| e.0);
            for (j, v) in entries {
                if j == i {
                    diag[i] = v;
                }
                indices.push(j);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Csr { n, indptr, indices, data, diag }
    }

    pub fn from_triplets(n: usize, t: &[(usize, usize, f64)]) -> Self {
        let mut tri = TriMat::new((n, n));
        for &(i, j, v) in t {
            tri.add_triplet(i, j, v);
        }
        Self::from_sprs(&tri.to_csr())
    }

    pub fn to_sprs(&self) -> CsMat<f64> {
        CsMat::new((self.n, self.n), self.indptr.clone(), self.indices.clone(), self.data.clone())
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    /// `A + diag(d)`.
    pub fn add_diag(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.indptr[i]..out.indptr[i + 1] {
                if out.indices[k] == i {
                    out.data[k] += d[i];
                }
            }
            out.diag[i] += d[i];
        }
        out
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            *yi = s;
        });
    }

    /// `r = b - A x`.
    pub fn residual(&self, x: &[f64], b: &[f64], r: &mut [f64]) {
        r.par_iter_mut().enumerate().for_each(|(i, ri)| {
            let mut s = b[i];
            for k in self.indptr[i]..self.indptr[i + 1] {
                s -= self.data[k] * x[self.indices[k]];
            }
            *ri = s;
        });
    }

    fn gauss_seidel(&self, x: &mut [f64], b: &[f64], forward: bool) {
        let mut sweep = |i: usize| {
            let mut s = b[i];
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                if j != i {
                    s -= self.data[k] * x[j];
                }
            }
            x[i] = s / self.diag[i];
        };
        if forward {
            (0..self.n).for_each(&mut sweep);
        } else {
            (0..self.n).rev().for_each(&mut sweep);
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Coarsening data: unknowns carry integer lattice coordinates; the coarse
/// lattice keeps the even-even nodes.
struct Level {
    a: Csr,
    /// Prolongation from the next coarser level: for each fine unknown, the
    /// coarse unknowns and bilinear weights (missing coarse nodes dropped).
    p: Vec<Vec<(usize, f64)>>,
    n_coarse: usize,
}

/// Geometric multigrid V-cycle with Galerkin coarse operators.
pub struct Multigrid {
    levels: Vec<Level>,
    coarse_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Multigrid {
    /// `coords[k]` are the lattice coordinates of unknown `k`.
    pub fn new(a: &Csr, coords: &[(i64, i64)]) -> Result<Self> {
        let mut levels = Vec::new();
        let mut a = a.clone();
        let mut coords = coords.to_vec();
        while a.n > COARSEST {
            let even = |c: (i64, i64)| c.0.rem_euclid(2) == 0 && c.1.rem_euclid(2) == 0;
            let mut cmap = std::collections::HashMap::new();
            let mut ccoords = Vec::new();
            for c in &coords {
                if even(*c) {
                    cmap.insert((c.0.div_euclid(2), c.1.div_euclid(2)), ccoords.len());
                    ccoords.push((c.0.div_euclid(2), c.1.div_euclid(2)));
                }
            }
            if ccoords.is_empty() || ccoords.len() * 2 > a.n {
                break;
            }
            let mut p = Vec::with_capacity(a.n);
            for &(i, j) in &coords {
                let xs: Vec<(i64, f64)> =
                    if i.rem_euclid(2) == 0 { vec![(i / 2, 1.0)] } else { vec![(i.div_euclid(2), 0.5), (i.div_euclid(2) + 1, 0.5)] };
                let ys: Vec<(i64, f64)> =
                    if j.rem_euclid(2) == 0 { vec![(j / 2, 1.0)] } else { vec![(j.div_euclid(2), 0.5), (j.div_euclid(2) + 1, 0.5)] };
                let mut row = Vec::new();
                for &(ci, wx) in &xs {
                    for &(cj, wy) in &ys {
                        if let Some(&k) = cmap.get(&(ci, cj)) {
                            row.push((k, wx * wy));
                        }
                    }
                }
                p.push(row);
            }
            let nc = ccoords.len();
            let mut tri = TriMat::new((a.n, nc));
            for (i, row) in p.iter().enumerate() {
                for &(k, w) in row {
                    tri.add_triplet(i, k, w);
                }
            }
            let pm: CsMat<f64> = tri.to_csr();
            let pt: CsMat<f64> = pm.transpose_view().to_csr();
            let ap = &a.to_sprs() * &pm;
            let ac = Csr::from_sprs(&(&pt * &ap));
            if ac.diag.iter().any(|d| *d == 0.0) {
                break;
            }
            levels.push(Level { a, p, n_coarse: nc });
            a = ac;
            coords = ccoords;
        }
        let mut dense = DMatrix::zeros(a.n, a.n);
        for i in 0..a.n {
            for (j, v) in a.row(i) {
                dense[(i, j)] = v;
            }
        }
        let coarse_lu = dense.lu();
        if a.n > 0 && coarse_lu.u().diagonal().iter().any(|d| *d == 0.0) {
            return Err(Error::SingularJacobian);
        }
        levels.push(Level { a, p: Vec::new(), n_coarse: 0 });
        Ok(Multigrid { levels, coarse_lu })
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.vcycle(0, b)
    }

    fn vcycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let lev = &self.levels[l];
        if l + 1 == self.levels.len() {
            let rhs = DVector::from_column_slice(b);
            return self.coarse_lu.solve(&rhs).map(|v| v.as_slice().to_vec()).unwrap_or_else(|| vec![0.0; b.len()]);
        }
        let mut x = vec![0.0; lev.a.n];
        for _ in 0..2 {
            lev.a.gauss_seidel(&mut x, b, true);
        }
        let mut r = vec![0.0; lev.a.n];
        lev.a.residual(&x, b, &mut r);
        let mut rc = vec![0.0; lev.n_coarse];
        for (i, row) in lev.p.iter().enumerate() {
            for &(k, w) in row {
                rc[k] += w * r[i];
            }
        }
        let ec = self.vcycle(l + 1, &rc);
        for (i, row) in lev.p.iter().enumerate() {
            for &(k, w) in row {
                x[i] += w * ec[k];
            }
        }
        for _ in 0..2 {
            lev.a.gauss_seidel(&mut x, b, false);
        }
        x
    }
}

/// Right-preconditioned BiCGSTAB; stops when `max |b - A x| <= tol`.
pub fn bicgstab(a: &Csr, mg: &Multigrid, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    a.residual(&x, b, &mut r);
    if max_abs(&r) <= tol {
        return Ok(x);
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut best = (max_abs(&r), x.clone());
    for _ in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = mg.apply(&p);
        a.matvec(&ph, &mut v);
        let d = dot(&r0, &v);
        if d == 0.0 {
            break;
        }
        alpha = rho / d;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if max_abs(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            a.residual(&x, b, &mut r);
            if max_abs(&r) <= tol {
                return Ok(x);
            }
            continue;
        }
        let sh = mg.apply(&s);
        a.matvec(&sh, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
        }
        // true residual keeps the stopping test honest
        a.residual(&x, b, &mut r);
        let rn = max_abs(&r);
        if rn < best.0 {
            best = (rn, x.clone());
        }
        if rn <= tol {
            return Ok(x);
        }
        if omega == 0.0 {
            break;
        }
    }
    // accept a stagnated solve only if it reached the roundoff floor
    let floor = 64.0 * f64::EPSILON * max_abs(&a.diag) * max_abs(&best.1).max(max_abs(b) / max_abs(&a.diag).max(1.0));
    if best.0 <= tol.max(floor) {
        Ok(best.1)
    } else {
        Err(Error::SingularJacobian)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(m: usize) -> (Csr, Vec<(i64, i64)>) {
        let idx = |i: usize, j: usize| j * m + i;
        let mut t = Vec::new();
        let mut coords = Vec::new();
        for j in 0..m {
            for i in 0..m {
                coords.push((i as i64 + 1, j as i64 + 1));
                t.push((idx(i, j), idx(i, j), 4.0));
                if i > 0 {
                    t.push((idx(i, j), idx(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((idx(i, j), idx(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                }
            }
        }
        (Csr::from_triplets(m * m, &t), coords)
    }

    #[test]
    fn multigrid_bicgstab_solves_poisson() {
        let (a, coords) = laplacian(63);
        let mg = Multigrid::new(&a, &coords).unwrap();
        let b = vec![1.0; a.n];
        let x = bicgstab(&a, &mg, &b, None, 1e-12, 100).unwrap();
        let mut r = vec![0.0; a.n];
        a.residual(&x, &b, &mut r);
        assert!(max_abs(&r) <= 1e-12);
    }

    #[test]
    fn dot_is_thread_count_independent() {
        let a: Vec<f64> = (0..20000).map(|k| (k as f64 * 0.37).sin()).collect();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| dot(&a, &a));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let four = pool.install(|| dot(&a, &a));
        assert_eq!(one.to_bits(), four.to_bits());
    }
}
