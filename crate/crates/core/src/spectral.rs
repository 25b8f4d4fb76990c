//! Horizontal Fourier machinery on the unit torus.
//!
//! Coefficients are normalised so that mode `(0, 0)` is the horizontal mean:
//! `f̂(k) = mean(f · exp(-2πi k·x))`. The Nyquist index of an even grid is
//! treated as wavenumber `n/2` for even-order symbols and dropped from odd-order
//! ones, which keeps every odd derivative exactly skew-adjoint and every even
//! one self-adjoint with respect to the discrete inner product.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Grid, Surface, Volume};

pub const TWO_PI: f64 = 2.0 * PI;

/// FFT plans and wavenumber tables for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    nyq1: usize,
    nyq2: usize,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

fn wavenumbers(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 })
        .collect()
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        Self {
            grid,
            fwd1: planner.plan_fft_forward(grid.n1),
            inv1: planner.plan_fft_inverse(grid.n1),
            fwd2: planner.plan_fft_forward(grid.n2),
            inv2: planner.plan_fft_inverse(grid.n2),
            k1: wavenumbers(grid.n1),
            k2: wavenumbers(grid.n2),
            nyq1: grid.n1 / 2,
            nyq2: grid.n2 / 2,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Integer wavevector of the coefficient at flat index `p = i1 * n2 + i2`.
    #[inline]
    pub fn wavevector(&self, p: usize) -> (f64, f64) {
        (self.k1[p / self.grid.n2], self.k2[p % self.grid.n2])
    }

    /// `2π |k|` for the coefficient at flat index `p`.
    #[inline]
    pub fn kappa(&self, p: usize) -> f64 {
        let (a, b) = self.wavevector(p);
        TWO_PI * (a * a + b * b).sqrt()
    }

    fn fft2(&self, data: &mut [Complex64], fwd: bool) {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let (p1, p2) = if fwd {
            (&self.fwd1, &self.fwd2)
        } else {
            (&self.inv1, &self.inv2)
        };
        p2.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n1];
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                col[i1] = data[i1 * n2 + i2];
            }
            p1.process(&mut col);
            for i1 in 0..n1 {
                data[i1 * n2 + i2] = col[i1];
            }
        }
    }

    /// Forward transform of one horizontal slice.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let scale = 1.0 / self.grid.plane() as f64;
        let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x * scale, 0.0)).collect();
        self.fft2(&mut buf, true);
        buf
    }

    /// Inverse transform of one slice of coefficients, keeping the real part.
    pub fn inverse(&self, c: &[Complex64]) -> Vec<f64> {
        let mut buf = c.to_vec();
        self.fft2(&mut buf, false);
        buf.into_iter().map(|z| z.re).collect()
    }

    fn odd_factor(&self, k: f64, i: usize, nyq: usize, order: u32) -> Complex64 {
        if order == 0 {
            return Complex64::new(1.0, 0.0);
        }
        if order % 2 == 1 && i == nyq {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, TWO_PI * k).powu(order)
    }

    /// Fourier symbol of `∂₁^a ∂₂^b` at flat index `p`.
    pub fn derivative_symbol(&self, p: usize, a: u32, b: u32) -> Complex64 {
        let i1 = p / self.grid.n2;
        let i2 = p % self.grid.n2;
        self.odd_factor(self.k1[i1], i1, self.nyq1, a) * self.odd_factor(self.k2[i2], i2, self.nyq2, b)
    }

    /// Applies a per-mode multiplier to a surface field.
    pub fn apply_symbol(&self, f: &[f64], sym: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let mut c = self.forward(f);
        for (p, z) in c.iter_mut().enumerate() {
            *z *= sym(p);
        }
        self.inverse(&c)
    }

    /// `∂₁^a ∂₂^b f` for a surface field.
    pub fn deriv(&self, f: &Surface, a: u32, b: u32) -> Surface {
        Surface(self.apply_symbol(&f.0, |p| self.derivative_symbol(p, a, b)))
    }

    /// Horizontal Laplacian `Δ₂ = ∂₁² + ∂₂²` of a surface field.
    pub fn laplacian(&self, f: &Surface) -> Surface {
        Surface(self.apply_symbol(&f.0, |p| {
            self.derivative_symbol(p, 2, 0) + self.derivative_symbol(p, 0, 2)
        }))
    }

    /// Whether mode `p` survives the 2/3-rule truncation.
    #[inline]
    pub fn retained(&self, p: usize) -> bool {
        let (a, b) = self.wavevector(p);
        3.0 * a.abs() <= self.grid.n1 as f64
            && 3.0 * b.abs() <= self.grid.n2 as f64
            && p / self.grid.n2 != self.nyq1
            && p % self.grid.n2 != self.nyq2
    }

    /// 2/3-rule truncation of one slice.
    pub fn dealias_slice(&self, f: &[f64]) -> Vec<f64> {
        self.apply_symbol(f, |p| {
            if self.retained(p) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn dealias(&self, f: &Surface) -> Surface {
        Surface(self.dealias_slice(&f.0))
    }

    /// Level-by-level 2/3-rule truncation of a volume field.
    pub fn dealias_volume(&self, f: &Volume) -> Volume {
        self.map_levels(f, |s| self.dealias_slice(s))
    }

    /// Horizontal derivative `∂₁^a ∂₂^b` of a volume field, level by level.
    pub fn deriv_volume(&self, f: &Volume, a: u32, b: u32) -> Volume {
        self.map_levels(f, |s| self.apply_symbol(s, |p| self.derivative_symbol(p, a, b)))
    }

    /// Both first horizontal derivatives from a single forward transform per level.
    pub fn gradient_volume(&self, f: &Volume) -> (Volume, Volume) {
        let g = &self.grid;
        let m = g.plane();
        let mut d1 = vec![0.0; f.len()];
        let mut d2 = vec![0.0; f.len()];
        for l in 0..g.n3 {
            let c = self.forward(&f.0[l * m..(l + 1) * m]);
            let c1: Vec<Complex64> = c
                .iter()
                .enumerate()
                .map(|(p, z)| z * self.derivative_symbol(p, 1, 0))
                .collect();
            let c2: Vec<Complex64> = c
                .iter()
                .enumerate()
                .map(|(p, z)| z * self.derivative_symbol(p, 0, 1))
                .collect();
            d1[l * m..(l + 1) * m].copy_from_slice(&self.inverse(&c1));
            d2[l * m..(l + 1) * m].copy_from_slice(&self.inverse(&c2));
        }
        (Volume(d1), Volume(d2))
    }

    /// Applies a slice transform independently on each vertical level.
    pub fn map_levels(&self, f: &Volume, op: impl Fn(&[f64]) -> Vec<f64>) -> Volume {
        let m = self.grid.plane();
        let mut out = Vec::with_capacity(f.len());
        for l in 0..self.grid.n3 {
            out.extend(op(&f.0[l * m..(l + 1) * m]));
        }
        Volume(out)
    }

    /// Forward transforms of every level, concatenated.
    pub fn forward_volume(&self, f: &Volume) -> Vec<Complex64> {
        let m = self.grid.plane();
        let mut out = Vec::with_capacity(f.len());
        for l in 0..self.grid.n3 {
            out.extend(self.forward(&f.0[l * m..(l + 1) * m]));
        }
        out
    }

    pub fn inverse_volume(&self, c: &[Complex64]) -> Volume {
        let m = self.grid.plane();
        let mut out = Vec::with_capacity(c.len());
        for l in 0..self.grid.n3 {
            out.extend(self.inverse(&c[l * m..(l + 1) * m]));
        }
        Volume(out)
    }

    /// Multiplier `(1 + |2πk|²)^{s/2}`, i.e. `Λ^s` with `Λ = (I - Δ₂)^{1/2}`.
    #[inline]
    pub fn lambda_symbol(&self, p: usize, s: f64) -> f64 {
        let k = self.kappa(p);
        (1.0 + k * k).powf(0.5 * s)
    }

    /// `Λ^s f` for a surface field.
    pub fn lambda_pow(&self, f: &Surface, s: f64) -> Surface {
        Surface(self.apply_symbol(&f.0, |p| Complex64::new(self.lambda_symbol(p, s), 0.0)))
    }
}
