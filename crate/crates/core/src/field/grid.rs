//! Sampled fields on uniform Cartesian grids with an interior/boundary/exterior mask.

use serde::{Deserialize, Serialize};

use super::taylor::Derivs;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// Node values `values[j * nx + i]` at `(x0 + i hx, y0 + j hy)`.
///
/// Exterior nodes hold NaN and are never read.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    values: Vec<f64>,
    mask: Vec<NodeKind>,
}

impl GridField {
    /// Builds a grid field; exterior values are overwritten with NaN.
    pub fn new(
        nx: usize,
        ny: usize,
        origin: (f64, f64),
        spacing: (f64, f64),
        mut values: Vec<f64>,
        mask: Vec<NodeKind>,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2x2 nodes".into()));
        }
        if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        if values.len() != nx * ny || mask.len() != nx * ny {
            return Err(Error::InvalidArgument(format!(
                "expected {} values and mask entries, got {} and {}",
                nx * ny,
                values.len(),
                mask.len()
            )));
        }
        for (v, m) in values.iter_mut().zip(&mask) {
            if *m == NodeKind::Exterior {
                *v = f64::NAN;
            }
        }
        let g = GridField { nx, ny, x0: origin.0, y0: origin.1, hx: spacing.0, hy: spacing.1, values, mask };
        for j in 0..ny {
            for i in 0..nx {
                if g.kind(i, j) != NodeKind::Interior {
                    continue;
                }
                let edge = i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
                let bad = edge
                    || [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                        .iter()
                        .any(|&(a, b)| g.kind(a, b) == NodeKind::Exterior);
                if bad {
                    return Err(Error::InvalidArgument(format!(
                        "interior node ({i}, {j}) has an exterior or missing neighbor"
                    )));
                }
            }
        }
        Ok(g)
    }

    /// Mask reconstructed from values alone: NaN is exterior, finite nodes on
    /// the array edge or next to an exterior node are boundary.
    pub fn from_values(
        nx: usize,
        ny: usize,
        origin: (f64, f64),
        spacing: (f64, f64),
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        let ext = |i: usize, j: usize| values[j * nx + i].is_nan();
        let mut mask = vec![NodeKind::Exterior; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                if ext(i, j) {
                    continue;
                }
                let edge = i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
                let near_ext = !edge
                    && (ext(i - 1, j) || ext(i + 1, j) || ext(i, j - 1) || ext(i, j + 1));
                mask[j * nx + i] =
                    if edge || near_ext { NodeKind::Boundary } else { NodeKind::Interior };
            }
        }
        Self::new(nx, ny, origin, spacing, values, mask)
    }

    /// Grid of the constant `c` on a fully interior rectangle.
    pub fn constant(nx: usize, ny: usize, origin: (f64, f64), spacing: (f64, f64), c: f64) -> Result<Self> {
        Self::from_values(nx, ny, origin, spacing, vec![c; nx * ny])
    }

    /// Samples `f` at every node of a rectangle.
    pub fn sample<F: Fn(f64, f64) -> f64>(
        nx: usize,
        ny: usize,
        origin: (f64, f64),
        spacing: (f64, f64),
        f: F,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(origin.0 + i as f64 * spacing.0, origin.1 + j as f64 * spacing.1));
            }
        }
        Self::from_values(nx, ny, origin, spacing, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[NodeKind] {
        &self.mask
    }

    pub fn kind(&self, i: usize, j: usize) -> NodeKind {
        self.mask[j * self.nx + i]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy)
    }

    pub fn extent(&self) -> [f64; 4] {
        [
            self.x0,
            self.x0 + (self.nx - 1) as f64 * self.hx,
            self.y0,
            self.y0 + (self.ny - 1) as f64 * self.hy,
        ]
    }

    fn usable(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.nx + i] != NodeKind::Exterior
    }

    /// Cell containing the point and the local coordinates in it, if every
    /// corner is usable.
    fn locate(&self, x: f64, y: f64) -> Option<(usize, usize, f64, f64)> {
        let fx = (x - self.x0) / self.hx;
        let fy = (y - self.y0) / self.hy;
        let eps = 1e-9;
        if !(fx >= -eps && fy >= -eps && fx <= (self.nx - 1) as f64 + eps && fy <= (self.ny - 1) as f64 + eps) {
            return None;
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 2);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 2);
        let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
        if corners.iter().all(|&(a, b)| self.usable(a, b)) {
            Some((i, j, fx - i as f64, fy - j as f64))
        } else {
            None
        }
    }

    /// True when every corner of the cell holding the point is an interior
    /// node, so the interpolant there uses only values where the PDE holds.
    pub fn in_interior_cell(&self, x: f64, y: f64) -> bool {
        self.locate(x, y).is_some_and(|(i, j, _, _)| {
            [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)].iter().all(|&(a, b)| self.kind(a, b) == NodeKind::Interior)
        })
    }

    /// True when the point can be evaluated.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.locate(x, y).is_some()
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.derivs(x, y, 0)?.value())
    }

    /// Derivatives of the local interpolant: tensor-product cubic Lagrange on
    /// a 4x4 node stencil (exact for bicubic data), falling back to bilinear
    /// on cells whose cubic stencil would touch exterior nodes.
    pub fn derivs(&self, x: f64, y: f64, order: usize) -> Result<Derivs> {
        let (i, j, _, _) = self.locate(x, y).ok_or(Error::PointOutsideDomain { x, y })?;
        let fx = (x - self.x0) / self.hx;
        let fy = (y - self.y0) / self.hy;
        if self.nx >= 4 && self.ny >= 4 {
            for (si, sj) in stencil_starts(i, self.nx).into_iter().flat_map(|a| {
                stencil_starts(j, self.ny).into_iter().map(move |b| (a, b))
            }) {
                let ok = (0..4).all(|b| (0..4).all(|a| self.usable(si + a, sj + b)));
                if ok {
                    return Ok(self.tensor_derivs(si, sj, 4, fx, fy, order));
                }
            }
        }
        Ok(self.tensor_derivs(i, j, 2, fx, fy, order))
    }

    fn tensor_derivs(&self, si: usize, sj: usize, m: usize, fx: f64, fy: f64, order: usize) -> Derivs {
        let wx = lagrange_weights(fx - si as f64, m, order.min(m - 1));
        let wy = lagrange_weights(fy - sj as f64, m, order.min(m - 1));
        let mut out = Derivs::zeros(order);
        for k in 0..=order {
            for b in 0..=k {
                let a = k - b;
                if a >= m || b >= m {
                    continue;
                }
                let mut s = 0.0;
                for q in 0..m {
                    let mut row = 0.0;
                    for p in 0..m {
                        row += wx[a][p] * self.value(si + p, sj + q);
                    }
                    s += wy[b][q] * row;
                }
                out.set(a, b, s / (self.hx.powi(a as i32) * self.hy.powi(b as i32)));
            }
        }
        out
    }
}

/// Candidate first indices of a 4-node stencil around cell `i`, centered first.
fn stencil_starts(i: usize, n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for off in [1isize, 0, 2] {
        let s = i as isize - off;
        if s >= 0 && (s as usize) + 3 < n {
            let s = s as usize;
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

/// Weights of the derivatives (orders `0..=max_d`) of the Lagrange
/// interpolant through nodes `0..m` evaluated at local coordinate `t`.
fn lagrange_weights(t: f64, m: usize, max_d: usize) -> Vec<Vec<f64>> {
    // Expand each basis polynomial into monomial coefficients, then differentiate.
    let mut out = vec![vec![0.0; m]; max_d + 1];
    for p in 0..m {
        let mut poly = vec![1.0];
        let mut denom = 1.0;
        for q in 0..m {
            if q == p {
                continue;
            }
            let mut next = vec![0.0; poly.len() + 1];
            for (k, c) in poly.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * q as f64;
            }
            poly = next;
            denom *= p as f64 - q as f64;
        }
        for (d, row) in out.iter_mut().enumerate() {
            let mut v = 0.0;
            for (k, c) in poly.iter().enumerate().skip(d) {
                let mut f = 1.0;
                for r in 0..d {
                    f *= (k - r) as f64;
                }
                v += c * f * t.powi((k - d) as i32);
            }
            row[p] = v / denom;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_grid_interpolates_constant() {
        let g = GridField::constant(9, 9, (0.0, 0.0), (0.125, 0.125), 5.0).unwrap();
        for &(x, y) in &[(0.3, 0.71), (0.5, 0.5), (0.01, 0.99), (1.0, 1.0)] {
            let v = g.eval(x, y).unwrap();
            assert!((v - 5.0).abs() < 1e-13, "{x} {y} {v}");
        }
        assert!(g.eval(1.2, 0.5).is_err());
    }

    #[test]
    fn cubic_reproduction_with_derivatives() {
        let f = |x: f64, y: f64| 1.0 + 2.0 * x - y + x * x * y - 3.0 * y * y * y + 0.5 * x * x * x;
        let g = GridField::sample(21, 17, (-1.0, -0.5), (0.1, 0.0625), f).unwrap();
        let (x, y) = (0.337, 0.123);
        let d = g.derivs(x, y, 2).unwrap();
        assert!((d.value() - f(x, y)).abs() < 1e-12);
        assert!((d.get(1, 0) - (2.0 + 2.0 * x * y + 1.5 * x * x)).abs() < 1e-11);
        assert!((d.get(0, 2) - (-18.0 * y)).abs() < 1e-10);
        assert!((d.get(1, 1) - 2.0 * x).abs() < 1e-10);
    }

    #[test]
    fn mask_from_nan_values() {
        let mut v = vec![1.0; 25];
        v[0] = f64::NAN;
        let g = GridField::from_values(5, 5, (0.0, 0.0), (1.0, 1.0), v).unwrap();
        assert_eq!(g.kind(0, 0), NodeKind::Exterior);
        assert_eq!(g.kind(2, 2), NodeKind::Interior);
        assert_eq!(g.kind(4, 2), NodeKind::Boundary);
        assert!(!g.contains(0.5, 0.5));
        assert!(g.contains(2.5, 2.5));
    }

    #[test]
    fn interior_next_to_exterior_is_rejected() {
        let mut mask = vec![NodeKind::Boundary; 16];
        mask[5] = NodeKind::Interior;
        mask[6] = NodeKind::Exterior;
        assert!(GridField::new(4, 4, (0.0, 0.0), (1.0, 1.0), vec![0.0; 16], mask).is_err());
    }
}
