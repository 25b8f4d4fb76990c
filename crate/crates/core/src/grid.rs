//! Channel grid and the scalar field containers living on it.
//!
//! The reference domain is the periodic channel `T² × [0, 1]`. Horizontally the
//! grid is a uniform `n1 × n2` collocation grid of the unit torus; vertically it
//! has `n3` equispaced nodes including both walls, so `x3 = l / (n3 - 1)`.
//!
//! Volume fields are stored level by level: node `(i1, i2, l)` lives at
//! `l * n1 * n2 + i1 * n2 + i2`, which keeps every horizontal slice contiguous
//! for the per-level FFTs.

use std::ops::{Index, IndexMut};

use crate::error::GridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Grid {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Result<Self, GridError> {
        for (name, n) in [("N1", n1), ("N2", n2)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(GridError::Horizontal { name, value: n });
            }
        }
        if n3 < 9 {
            return Err(GridError::Vertical { value: n3 });
        }
        Ok(Self { n1, n2, n3 })
    }

    /// Number of nodes in one horizontal slice.
    #[inline]
    pub fn plane(&self) -> usize {
        self.n1 * self.n2
    }

    #[inline]
    pub fn volume(&self) -> usize {
        self.plane() * self.n3
    }

    /// Vertical spacing `1 / (n3 - 1)`.
    #[inline]
    pub fn dz(&self) -> f64 {
        1.0 / (self.n3 - 1) as f64
    }

    #[inline]
    pub fn dx1(&self) -> f64 {
        1.0 / self.n1 as f64
    }

    #[inline]
    pub fn dx2(&self) -> f64 {
        1.0 / self.n2 as f64
    }

    #[inline]
    pub fn x1(&self, i1: usize) -> f64 {
        i1 as f64 / self.n1 as f64
    }

    #[inline]
    pub fn x2(&self, i2: usize) -> f64 {
        i2 as f64 / self.n2 as f64
    }

    #[inline]
    pub fn x3(&self, l: usize) -> f64 {
        l as f64 * self.dz()
    }

    #[inline]
    pub fn idx(&self, i1: usize, i2: usize, l: usize) -> usize {
        l * self.plane() + i1 * self.n2 + i2
    }

    /// Trapezoid weights in `x3`; together with the horizontal mean they give
    /// the discrete volume integral.
    pub fn vertical_weights(&self) -> Vec<f64> {
        let dz = self.dz();
        let mut w = vec![dz; self.n3];
        w[0] = 0.5 * dz;
        w[self.n3 - 1] = 0.5 * dz;
        w
    }
}

/// Real scalar field on the `n1 × n2` grid of the top (or bottom) boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface(pub Vec<f64>);

/// Real scalar field on the full `n1 × n2 × n3` channel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume(pub Vec<f64>);

macro_rules! field_common {
    ($t:ident) => {
        impl $t {
            pub fn from_vec(v: Vec<f64>) -> Self {
                Self(v)
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.0
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }

            pub fn scaled(&self, a: f64) -> Self {
                Self(self.0.iter().map(|x| a * x).collect())
            }

            pub fn add(&self, other: &Self) -> Self {
                Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
            }

            pub fn sub(&self, other: &Self) -> Self {
                Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
            }

            /// `self += a * x`
            pub fn axpy(&mut self, a: f64, x: &Self) {
                for (s, v) in self.0.iter_mut().zip(&x.0) {
                    *s += a * v;
                }
            }

            /// Pointwise product.
            pub fn mul(&self, other: &Self) -> Self {
                Self(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
            }

            /// `a * self + b * other`
            pub fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
                Self(x.0.iter().zip(&y.0).map(|(p, q)| a * p + b * q).collect())
            }

            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.0
                    .iter()
                    .zip(&other.0)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            }

            pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
                Self(self.0.iter().map(|&x| f(x)).collect())
            }
        }

        impl Index<usize> for $t {
            type Output = f64;
            #[inline]
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $t {
            #[inline]
            fn index_mut(&mut self, i: usize) -> &mut f64 {
                &mut self.0[i]
            }
        }
    };
}

field_common!(Surface);
field_common!(Volume);

impl Surface {
    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.plane()])
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self(vec![c; grid.plane()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Vec::with_capacity(grid.plane());
        for i1 in 0..grid.n1 {
            for i2 in 0..grid.n2 {
                out.push(f(grid.x1(i1), grid.x2(i2)));
            }
        }
        Self(out)
    }

    /// Horizontal mean, i.e. the integral over the unit torus.
    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Discrete `L²(T²)` norm.
    pub fn l2(&self) -> f64 {
        (self.0.iter().map(|x| x * x).sum::<f64>() / self.0.len() as f64).sqrt()
    }

    /// Discrete `L²(T²)` inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum::<f64>() / self.0.len() as f64
    }
}

impl Volume {
    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.volume()])
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self(vec![c; grid.volume()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut out = Vec::with_capacity(grid.volume());
        for l in 0..grid.n3 {
            let z = grid.x3(l);
            for i1 in 0..grid.n1 {
                for i2 in 0..grid.n2 {
                    out.push(f(grid.x1(i1), grid.x2(i2), z));
                }
            }
        }
        Self(out)
    }

    /// The coordinate field `x3`.
    pub fn x3(grid: &Grid) -> Self {
        Self::from_fn(grid, |_, _, z| z)
    }

    pub fn level(&self, grid: &Grid, l: usize) -> &[f64] {
        let m = grid.plane();
        &self.0[l * m..(l + 1) * m]
    }

    pub fn level_mut(&mut self, grid: &Grid, l: usize) -> &mut [f64] {
        let m = grid.plane();
        &mut self.0[l * m..(l + 1) * m]
    }

    pub fn trace(&self, grid: &Grid, l: usize) -> Surface {
        Surface(self.level(grid, l).to_vec())
    }

    pub fn top(&self, grid: &Grid) -> Surface {
        self.trace(grid, grid.n3 - 1)
    }

    pub fn bottom(&self, grid: &Grid) -> Surface {
        self.trace(grid, 0)
    }

    pub fn set_level(&mut self, grid: &Grid, l: usize, s: &Surface) {
        self.level_mut(grid, l).copy_from_slice(&s.0);
    }

    /// Discrete volume integral (horizontal mean times trapezoid rule).
    pub fn integral(&self, grid: &Grid) -> f64 {
        let wz = grid.vertical_weights();
        let m = grid.plane() as f64;
        (0..grid.n3)
            .map(|l| wz[l] * self.level(grid, l).iter().sum::<f64>() / m)
            .sum()
    }

    /// Discrete `L²(Ω)` norm.
    pub fn l2(&self, grid: &Grid) -> f64 {
        self.mul(self).integral(grid).max(0.0).sqrt()
    }

    /// Max norm over interior levels only.
    pub fn max_abs_interior(&self, grid: &Grid) -> f64 {
        (1..grid.n3 - 1)
            .flat_map(|l| self.level(grid, l).iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Builds a volume field that repeats one surface field on every level.
    pub fn extrude(grid: &Grid, s: &Surface) -> Self {
        let mut out = Vec::with_capacity(grid.volume());
        for _ in 0..grid.n3 {
            out.extend_from_slice(&s.0);
        }
        Self(out)
    }
}

/// First vertical derivative: centred in the interior, one-sided second order
/// at both walls.
pub fn d3(grid: &Grid, f: &Volume) -> Volume {
    let m = grid.plane();
    let n = grid.n3;
    let inv = 1.0 / (2.0 * grid.dz());
    let mut out = vec![0.0; f.len()];
    let g = &f.0;
    for p in 0..m {
        out[p] = (-3.0 * g[p] + 4.0 * g[m + p] - g[2 * m + p]) * inv;
        for l in 1..n - 1 {
            out[l * m + p] = (g[(l + 1) * m + p] - g[(l - 1) * m + p]) * inv;
        }
        let t = (n - 1) * m + p;
        out[t] = (3.0 * g[t] - 4.0 * g[t - m] + g[t - 2 * m]) * inv;
    }
    Volume(out)
}

/// Second vertical derivative: three-point in the interior, one-sided
/// four-point (second order) at the walls.
pub fn d33(grid: &Grid, f: &Volume) -> Volume {
    let m = grid.plane();
    let n = grid.n3;
    let inv = 1.0 / (grid.dz() * grid.dz());
    let mut out = vec![0.0; f.len()];
    let g = &f.0;
    for p in 0..m {
        out[p] = (2.0 * g[p] - 5.0 * g[m + p] + 4.0 * g[2 * m + p] - g[3 * m + p]) * inv;
        for l in 1..n - 1 {
            out[l * m + p] = (g[(l + 1) * m + p] - 2.0 * g[l * m + p] + g[(l - 1) * m + p]) * inv;
        }
        let t = (n - 1) * m + p;
        out[t] = (2.0 * g[t] - 5.0 * g[t - m] + 4.0 * g[t - 2 * m] - g[t - 3 * m]) * inv;
    }
    Volume(out)
}

/// Same stencils as [`d3`] applied to a single vertical column.
pub fn d3_column(dz: f64, col: &[f64], out: &mut [f64]) {
    let n = col.len();
    let inv = 1.0 / (2.0 * dz);
    out[0] = (-3.0 * col[0] + 4.0 * col[1] - col[2]) * inv;
    for l in 1..n - 1 {
        out[l] = (col[l + 1] - col[l - 1]) * inv;
    }
    out[n - 1] = (3.0 * col[n - 1] - 4.0 * col[n - 2] + col[n - 3]) * inv;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(8, 8, 9).is_ok());
        assert!(Grid::new(6, 8, 9).is_err());
        assert!(Grid::new(8, 12, 9).is_err());
        assert!(Grid::new(8, 8, 8).is_err());
    }

    #[test]
    fn vertical_stencils_exact_on_quadratics() {
        let g = Grid::new(8, 8, 9).unwrap();
        let f = Volume::from_fn(&g, |_, _, z| 3.0 * z * z - z + 2.0);
        let df = d3(&g, &f);
        let ddf = d33(&g, &f);
        for l in 0..g.n3 {
            let z = g.x3(l);
            let i = g.idx(3, 5, l);
            assert!((df[i] - (6.0 * z - 1.0)).abs() < 1e-12);
            assert!((ddf[i] - 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn trapezoid_integral_of_linear_profile() {
        let g = Grid::new(8, 8, 17).unwrap();
        let f = Volume::x3(&g);
        assert!((f.integral(&g) - 0.5).abs() < 1e-14);
    }
}
