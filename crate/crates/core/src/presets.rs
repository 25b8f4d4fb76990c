//! Registered initial data.
//!
//! Every preset starts from a flat plate (`w(0) = 0`) and builds `v₀` so that
//! the discrete divergence vanishes at every node: the vertical component is
//! the harmonic profile of `w₁`, the horizontal part is the gradient that
//! balances it mode by mode, and any extra flow is a horizontal curl.

use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fluid::{zero_vector, VectorField};
use crate::geometry::extend_boundary_data;
use crate::grid::{d3, Surface, Volume};
use crate::plate::PlateState;
use crate::spectral::{Spectral, TWO_PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Zero,
    SingleModePlate,
    ShearFlow,
    RandomBandlimited,
    RotationalFlow,
}

impl PresetKind {
    pub const ALL: [PresetKind; 5] = [
        PresetKind::Zero,
        PresetKind::SingleModePlate,
        PresetKind::ShearFlow,
        PresetKind::RandomBandlimited,
        PresetKind::RotationalFlow,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::SingleModePlate => "single_mode_plate",
            Self::ShearFlow => "shear_flow",
            Self::RandomBandlimited => "random_bandlimited",
            Self::RotationalFlow => "rotational_flow",
        }
    }
}

impl FromStr for PresetKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|p| p.as_str()).collect();
            format!("unknown preset `{s}`; available: {}", names.join(", "))
        })
    }
}

/// Preset selection and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub kind: PresetKind,
    /// Amplitude of the plate velocity `w₁`.
    pub amplitude: f64,
    /// Amplitude of the additional fluid motion.
    pub flow_amplitude: f64,
    pub seed: u64,
    /// Largest wavenumber component used by the random preset.
    pub max_mode: usize,
}

impl Default for Preset {
    fn default() -> Self {
        Self {
            kind: PresetKind::Zero,
            amplitude: 1e-3,
            flow_amplitude: 0.0,
            seed: 0,
            max_mode: 2,
        }
    }
}

/// Plate state and fluid velocity at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub plate: PlateState,
    pub v: VectorField,
}

/// Velocity whose vertical part is the harmonic extension of `w1` and whose
/// horizontal part is the gradient `∇χ` with `Δ₂χ = -D₃v₃` level by level.
pub fn potential_velocity(spec: &Spectral, w1: &Surface) -> VectorField {
    let grid = *spec.grid();
    let m = grid.plane();
    let v3 = extend_boundary_data(spec, w1);
    let dv3 = d3(&grid, &v3);
    let mut v1 = Vec::with_capacity(grid.volume());
    let mut v2 = Vec::with_capacity(grid.volume());
    for l in 0..grid.n3 {
        let c = spec.forward(dv3.level(&grid, l));
        let mut c1 = vec![Complex64::new(0.0, 0.0); m];
        let mut c2 = vec![Complex64::new(0.0, 0.0); m];
        for p in 0..m {
            let s1 = spec.derivative_symbol(p, 1, 0);
            let s2 = spec.derivative_symbol(p, 0, 1);
            let k2 = s1.norm_sqr() + s2.norm_sqr();
            if k2 > 0.0 {
                let chi = c[p] / k2;
                c1[p] = chi * s1;
                c2[p] = chi * s2;
            }
        }
        v1.extend(spec.inverse(&c1));
        v2.extend(spec.inverse(&c2));
    }
    [Volume(v1), Volume(v2), v3]
}

/// Horizontal flow `(∂₂s, -∂₁s, 0)` of a z-independent stream function.
pub fn stream_velocity(spec: &Spectral, s: &Surface) -> VectorField {
    let grid = *spec.grid();
    [
        Volume::extrude(&grid, &spec.deriv(s, 0, 1)),
        Volume::extrude(&grid, &spec.deriv(s, 1, 0).scaled(-1.0)),
        Volume::zeros(&grid),
    ]
}

fn add(a: &VectorField, b: &VectorField) -> VectorField {
    [a[0].add(&b[0]), a[1].add(&b[1]), a[2].add(&b[2])]
}

/// Random real field with Fourier support in `|k₁|, |k₂| ≤ kmax`, zero mean,
/// scaled to unit max norm.
fn random_surface(spec: &Spectral, rng: &mut ChaCha8Rng, kmax: usize) -> Surface {
    let g = *spec.grid();
    let kmax = kmax.min(g.n1 / 3).min(g.n2 / 3).max(1) as i64;
    let mut f = Surface::zeros(&g);
    for k1 in -kmax..=kmax {
        for k2 in 0..=kmax {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let decay = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
            let a: f64 = rng.gen_range(-1.0..1.0) * decay;
            let b: f64 = rng.gen_range(-1.0..1.0) * decay;
            let mode = Surface::from_fn(&g, |x, y| {
                let ph = TWO_PI * (k1 as f64 * x + k2 as f64 * y);
                a * ph.cos() + b * ph.sin()
            });
            f = f.add(&mode);
        }
    }
    let scale = f.max_abs();
    if scale > 0.0 {
        f.scaled(1.0 / scale)
    } else {
        f
    }
}

pub fn build_initial_data(spec: &Spectral, preset: &Preset) -> InitialData {
    let grid = *spec.grid();
    let zero_plate = PlateState::at_rest(spec);
    let with_plate = |w1: Surface, extra: VectorField| {
        let v = add(&potential_velocity(spec, &w1), &extra);
        InitialData {
            plate: PlateState {
                w: Surface::zeros(&grid),
                w_t: w1,
                t: 0.0,
            },
            v,
        }
    };
    match preset.kind {
        PresetKind::Zero => InitialData {
            plate: zero_plate,
            v: zero_vector(&grid),
        },
        PresetKind::SingleModePlate => {
            let a = preset.amplitude;
            let w1 = Surface::from_fn(&grid, |x, _| a * (TWO_PI * x).cos());
            with_plate(w1, zero_vector(&grid))
        }
        PresetKind::ShearFlow => {
            let u = if preset.flow_amplitude != 0.0 {
                preset.flow_amplitude
            } else {
                1.0
            };
            let mut v = zero_vector(&grid);
            v[0] = Volume::from_fn(&grid, |_, y, _| u * (TWO_PI * y).sin());
            InitialData { plate: zero_plate, v }
        }
        PresetKind::RandomBandlimited => {
            let mut rng = ChaCha8Rng::seed_from_u64(preset.seed);
            let w1 = random_surface(spec, &mut rng, preset.max_mode).scaled(preset.amplitude);
            let s = random_surface(spec, &mut rng, preset.max_mode).scaled(preset.flow_amplitude / TWO_PI);
            with_plate(w1, stream_velocity(spec, &s))
        }
        PresetKind::RotationalFlow => {
            let a = preset.amplitude;
            let u = preset.flow_amplitude;
            let w1 = Surface::from_fn(&grid, |x, y| a * (TWO_PI * x).cos() * (TWO_PI * y).cos());
            let s = Surface::from_fn(&grid, |x, y| {
                u / TWO_PI * ((TWO_PI * x).sin() * (TWO_PI * y).sin() + 0.5 * (2.0 * TWO_PI * y).sin())
            });
            with_plate(w1, stream_velocity(spec, &s))
        }
    }
}
