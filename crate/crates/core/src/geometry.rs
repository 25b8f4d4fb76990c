//! ALE map of the channel: harmonic extension of the plate displacement and the
//! matrices `E = (∇η)⁻¹`, `F = J E` and `J = ∂₃ψ` it induces.
//!
//! Horizontal derivatives are spectral; vertical ones use the stencils of
//! [`crate::grid::d3`]. Because `J` and `F₃α = -∂αψ` are built with those same
//! operators, the first two Piola columns cancel to roundoff.

use num_complex::Complex64;

use crate::diagnostics::sobolev_volume;
use crate::error::GeometryError;
use crate::grid::{d3, d33, Grid, Surface, Volume};
use crate::spectral::Spectral;

/// Default lower bound on `J` below which the map counts as degenerate.
pub const DEFAULT_C_MIN: f64 = 0.1;

/// `sinh(κ z) / sinh(κ)` written with decaying exponentials so that large `κ`
/// never overflows. Reduces to `z` at `κ = 0`.
pub fn sinh_ratio(kappa: f64, z: f64) -> f64 {
    if kappa == 0.0 {
        return z;
    }
    if kappa < 1e-6 {
        // series keeps the ratio accurate when sinh(κ) underflows to κ
        return z * (1.0 + kappa * kappa * (z * z - 1.0) / 6.0);
    }
    let num = -(-2.0 * kappa * z).exp_m1();
    let den = -(-2.0 * kappa).exp_m1();
    (kappa * (z - 1.0)).exp() * num / den
}

/// Linear extension operator: harmonic in `Ω`, zero on `Γ0`, `g` on `Γ1`.
/// Each horizontal mode is evaluated from its closed-form profile.
pub fn extend_boundary_data(spec: &Spectral, g: &Surface) -> Volume {
    let grid = *spec.grid();
    let m = grid.plane();
    let coeffs = spec.forward(&g.0);
    let mut out = Vec::with_capacity(grid.volume());
    let kappas: Vec<f64> = (0..m).map(|p| spec.kappa(p)).collect();
    for l in 0..grid.n3 {
        let z = grid.x3(l);
        let level: Vec<Complex64> = coeffs.iter().zip(&kappas).map(|(c, &k)| c * sinh_ratio(k, z)).collect();
        out.extend(spec.inverse(&level));
    }
    Volume(out)
}

/// Harmonic extension `ψ` of `1 + w`: `ψ = 0` on `Γ0`, `ψ = 1 + w` on `Γ1`.
pub fn harmonic_extension(spec: &Spectral, w: &Surface) -> Result<Volume, GeometryError> {
    if !w.is_finite() {
        return Err(GeometryError::NonFinite {
            what: "plate displacement",
        });
    }
    let grid = spec.grid();
    let mut psi = extend_boundary_data(spec, w);
    for l in 0..grid.n3 {
        let z = grid.x3(l);
        for x in psi.level_mut(grid, l) {
            *x += z;
        }
    }
    Ok(psi)
}

/// 3×3 matrix of volume fields, indexed `[row][column]`.
pub type MatrixField = [[Volume; 3]; 3];

/// Sup norms and `H^{2.5}` proxies of `E - I`, `F - I` and `J - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallnessReport {
    pub e_minus_i_sup: f64,
    pub f_minus_i_sup: f64,
    pub j_minus_1_sup: f64,
    pub e_minus_i_h25: f64,
    pub f_minus_i_h25: f64,
    pub j_minus_1_h25: f64,
    pub epsilon: f64,
    pub within: bool,
}

impl SmallnessReport {
    pub fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("|E-I|_sup", self.e_minus_i_sup),
            ("|F-I|_sup", self.f_minus_i_sup),
            ("|J-1|_sup", self.j_minus_1_sup),
            ("|E-I|_H2.5", self.e_minus_i_h25),
            ("|F-I|_H2.5", self.f_minus_i_h25),
            ("|J-1|_H2.5", self.j_minus_1_h25),
        ]
    }

    /// The first quantity exceeding epsilon, if any.
    pub fn violation(&self) -> Option<GeometryError> {
        self.entries()
            .into_iter()
            .find(|(_, v)| !(*v <= self.epsilon))
            .map(|(quantity, value)| GeometryError::Smallness {
                quantity,
                value,
                epsilon: self.epsilon,
            })
    }
}

impl std::fmt::Display for SmallnessReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, v) in self.entries() {
            let ok = v <= self.epsilon;
            writeln!(f, "  {name:<12} {v:.3e}  {}", if ok { "ok" } else { "EXCEEDS" })?;
        }
        Ok(())
    }
}

/// ALE geometry induced by one plate configuration `(w, w_t)`.
#[derive(Debug, Clone)]
pub struct GeometryState {
    pub psi: Volume,
    pub psi_t: Volume,
    pub e: MatrixField,
    pub f: MatrixField,
    pub j: Volume,
    /// `∂₁ψ`, `∂₂ψ`
    pub dpsi: [Volume; 2],
    /// `∂₁ψ_t`, `∂₂ψ_t`, `∂₃ψ_t`; the only nonzero entries of `∂_t F` up to sign.
    pub dpsi_t: [Volume; 3],
    pub epsilon_report: SmallnessReport,
}

/// `E`, `F`, `J` for a given `ψ`.
pub struct AleMatrices {
    pub e: MatrixField,
    pub f: MatrixField,
    pub j: Volume,
    pub dpsi: [Volume; 2],
}

pub fn ale_matrices(spec: &Spectral, psi: &Volume, c_min: f64) -> Result<AleMatrices, GeometryError> {
    let grid = *spec.grid();
    if !psi.is_finite() {
        return Err(GeometryError::NonFinite { what: "psi" });
    }
    let (p1, p2) = spec.gradient_volume(psi);
    let j = d3(&grid, psi);
    let (mut worst, mut at) = (f64::INFINITY, 0);
    for (n, &v) in j.0.iter().enumerate() {
        if v < worst {
            worst = v;
            at = n;
        }
    }
    if !(worst > c_min) {
        let m = grid.plane();
        return Err(GeometryError::Degenerate {
            j: worst,
            c_min,
            l: at / m,
            i1: (at % m) / grid.n2,
            i2: at % grid.n2,
        });
    }
    let zero = Volume::zeros(&grid);
    let one = Volume::constant(&grid, 1.0);
    let inv_j = j.map(|x| 1.0 / x);
    let e31 = Volume(p1.0.iter().zip(&inv_j.0).map(|(a, b)| -a * b).collect());
    let e32 = Volume(p2.0.iter().zip(&inv_j.0).map(|(a, b)| -a * b).collect());
    let e = [
        [one.clone(), zero.clone(), zero.clone()],
        [zero.clone(), one.clone(), zero.clone()],
        [e31, e32, inv_j],
    ];
    let f = [
        [j.clone(), zero.clone(), zero.clone()],
        [zero.clone(), j.clone(), zero.clone()],
        [p1.scaled(-1.0), p2.scaled(-1.0), one],
    ];
    Ok(AleMatrices {
        e,
        f,
        j,
        dpsi: [p1, p2],
    })
}

impl GeometryState {
    /// Builds the full geometry for plate displacement `w` and velocity `w_t`.
    pub fn build(spec: &Spectral, w: &Surface, w_t: &Surface, c_min: f64, epsilon: f64) -> Result<Self, GeometryError> {
        if !w_t.is_finite() {
            return Err(GeometryError::NonFinite { what: "plate velocity" });
        }
        let grid = *spec.grid();
        let psi = harmonic_extension(spec, w)?;
        let AleMatrices { e, f, j, dpsi } = ale_matrices(spec, &psi, c_min)?;
        let psi_t = extend_boundary_data(spec, w_t);
        let (pt1, pt2) = spec.gradient_volume(&psi_t);
        let pt3 = d3(&grid, &psi_t);
        let mut geom = Self {
            psi,
            psi_t,
            e,
            f,
            j,
            dpsi,
            dpsi_t: [pt1, pt2, pt3],
            epsilon_report: SmallnessReport {
                e_minus_i_sup: 0.0,
                f_minus_i_sup: 0.0,
                j_minus_1_sup: 0.0,
                e_minus_i_h25: 0.0,
                f_minus_i_h25: 0.0,
                j_minus_1_h25: 0.0,
                epsilon,
                within: true,
            },
        };
        geom.epsilon_report = smallness_report(spec, &geom, epsilon);
        Ok(geom)
    }

    /// Reference configuration: `ψ = x3`, `E = F = I`.
    pub fn flat(spec: &Spectral) -> Self {
        let g = *spec.grid();
        Self::build(spec, &Surface::zeros(&g), &Surface::zeros(&g), DEFAULT_C_MIN, 0.5)
            .expect("flat geometry is nondegenerate")
    }

    /// `1 / J = E₃₃`
    pub fn inv_j(&self) -> &Volume {
        &self.e[2][2]
    }

    /// Entry `(∂_t F)_{ab}`.
    pub fn dt_f(&self, grid: &Grid, a: usize, b: usize) -> Volume {
        match (a, b) {
            (0, 0) | (1, 1) => self.dpsi_t[2].clone(),
            (2, 0) => self.dpsi_t[0].scaled(-1.0),
            (2, 1) => self.dpsi_t[1].scaled(-1.0),
            _ => Volume::zeros(grid),
        }
    }
}

/// `max |(∇η) E - I|` over all nodes and entries.
pub fn inverse_identity_error(geom: &GeometryState) -> f64 {
    let n = geom.j.len();
    let mut worst = 0.0_f64;
    for p in 0..n {
        let grad_eta = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [geom.dpsi[0][p], geom.dpsi[1][p], geom.j[p]],
        ];
        for a in 0..3 {
            for b in 0..3 {
                let s: f64 = (0..3).map(|c| grad_eta[a][c] * geom.e[c][b][p]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
    }
    worst
}

/// `max |F - J E|` over all nodes and entries.
pub fn cofactor_error(geom: &GeometryState) -> f64 {
    let mut worst = 0.0_f64;
    for a in 0..3 {
        for b in 0..3 {
            for p in 0..geom.j.len() {
                worst = worst.max((geom.f[a][b][p] - geom.j[p] * geom.e[a][b][p]).abs());
            }
        }
    }
    worst
}

/// Column residuals `max |∂_i F_{ij}|`, `j = 1, 2, 3`.
pub fn piola_residual(spec: &Spectral, f: &MatrixField) -> [f64; 3] {
    let grid = *spec.grid();
    let mut out = [0.0; 3];
    for (col, r) in out.iter_mut().enumerate() {
        let div = spec
            .deriv_volume(&f[0][col], 1, 0)
            .add(&spec.deriv_volume(&f[1][col], 0, 1))
            .add(&d3(&grid, &f[2][col]));
        *r = div.max_abs();
    }
    out
}

/// Interior max of the discrete Laplacian `Δ₂ψ + D₃₃ψ`.
pub fn laplacian_residual(spec: &Spectral, psi: &Volume) -> f64 {
    let grid = *spec.grid();
    let lap = spec
        .deriv_volume(psi, 2, 0)
        .add(&spec.deriv_volume(psi, 0, 2))
        .add(&d33(&grid, psi));
    lap.max_abs_interior(&grid)
}

pub fn smallness_report(spec: &Spectral, geom: &GeometryState, epsilon: f64) -> SmallnessReport {
    let grid = *spec.grid();
    let j_minus_1 = geom.j.map(|x| x - 1.0);
    let e33_minus_1 = geom.e[2][2].map(|x| x - 1.0);
    let sup = |fields: &[&Volume]| fields.iter().fold(0.0_f64, |m, f| m.max(f.max_abs()));
    let h25 = |fields: &[&Volume]| {
        fields
            .iter()
            .map(|f| sobolev_volume(spec, f, 2.5, 2).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let e_parts = [&geom.e[2][0], &geom.e[2][1], &e33_minus_1];
    let f_parts = [&j_minus_1, &j_minus_1, &geom.f[2][0], &geom.f[2][1]];
    let jh = sobolev_volume(spec, &j_minus_1, 2.5, 2);
    let _ = grid;
    let mut r = SmallnessReport {
        e_minus_i_sup: sup(&e_parts),
        f_minus_i_sup: sup(&f_parts),
        j_minus_1_sup: j_minus_1.max_abs(),
        e_minus_i_h25: h25(&e_parts),
        f_minus_i_h25: h25(&f_parts),
        j_minus_1_h25: jh,
        epsilon,
        within: true,
    };
    r.within = r.violation().is_none();
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TWO_PI;

    fn setup(n: usize, n3: usize) -> Spectral {
        Spectral::new(Grid::new(n, n, n3).unwrap())
    }

    #[test]
    fn zero_displacement_gives_linear_profile() {
        let s = setup(8, 9);
        let g = *s.grid();
        let psi = harmonic_extension(&s, &Surface::zeros(&g)).unwrap();
        assert!(psi.max_abs_diff(&Volume::x3(&g)) < 1e-15);
    }

    #[test]
    fn constant_displacement_scales_profile() {
        let s = setup(8, 9);
        let g = *s.grid();
        let psi = harmonic_extension(&s, &Surface::constant(&g, 0.25)).unwrap();
        let expect = Volume::from_fn(&g, |_, _, z| 1.25 * z);
        assert!(psi.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn single_mode_matches_closed_form() {
        let s = setup(16, 17);
        let g = *s.grid();
        let w = Surface::from_fn(&g, |x, _| 0.1 * (TWO_PI * x).cos());
        let psi = harmonic_extension(&s, &w).unwrap();
        let exact = Volume::from_fn(&g, |x, _, z| {
            z + 0.1 * (TWO_PI * x).cos() * (TWO_PI * z).sinh() / TWO_PI.sinh()
        });
        assert!(psi.max_abs_diff(&exact) < 1e-14);
    }

    #[test]
    fn sinh_ratio_large_kappa_is_finite_and_monotone() {
        let mut prev = 0.0;
        for i in 0..=20 {
            let z = i as f64 / 20.0;
            let r = sinh_ratio(5000.0, z);
            assert!(r.is_finite());
            assert!(r >= prev);
            prev = r;
        }
        assert!((sinh_ratio(5000.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((sinh_ratio(1.3, 0.4) - (1.3f64 * 0.4).sinh() / 1.3f64.sinh()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_displacement_rejected() {
        let s = setup(8, 9);
        let g = *s.grid();
        let mut w = Surface::zeros(&g);
        w[3] = f64::NAN;
        assert!(matches!(
            harmonic_extension(&s, &w),
            Err(GeometryError::NonFinite { .. })
        ));
    }

    #[test]
    fn flat_matrices_are_identity() {
        let s = setup(8, 9);
        let geom = GeometryState::flat(&s);
        for a in 0..3 {
            for b in 0..3 {
                let t = if a == b { 1.0 } else { 0.0 };
                assert!(geom.e[a][b].0.iter().all(|&x| (x - t).abs() < 1e-14));
                assert!(geom.f[a][b].0.iter().all(|&x| (x - t).abs() < 1e-14));
            }
        }
        let r = &geom.epsilon_report;
        assert!(r.within);
        assert!(r.e_minus_i_sup < 1e-14 && r.j_minus_1_h25 < 1e-12);
        assert_eq!(piola_residual(&s, &geom.f), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn f31_matches_differentiated_closed_form() {
        let s = setup(16, 17);
        let g = *s.grid();
        let w = Surface::from_fn(&g, |x, _| 0.1 * (TWO_PI * x).cos());
        let geom = GeometryState::build(&s, &w, &Surface::zeros(&g), DEFAULT_C_MIN, 0.5).unwrap();
        let exact = Volume::from_fn(&g, |x, _, z| {
            0.1 * TWO_PI * (TWO_PI * x).sin() * (TWO_PI * z).sinh() / TWO_PI.sinh()
        });
        assert!(geom.f[2][0].max_abs_diff(&exact) < 1e-12);
    }

    #[test]
    fn degenerate_map_names_worst_node() {
        let s = setup(8, 9);
        let g = *s.grid();
        // a deep dent folds the map near the top wall
        let w = Surface::from_fn(&g, |x, _| -0.95 * (TWO_PI * x).cos().max(0.0).powi(2));
        let psi = harmonic_extension(&s, &w).unwrap();
        match ale_matrices(&s, &psi, DEFAULT_C_MIN) {
            Err(GeometryError::Degenerate { j, l, .. }) => {
                assert!(j <= DEFAULT_C_MIN);
                assert!(l > 0);
            }
            other => panic!("expected degeneracy error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn first_two_piola_columns_cancel_exactly() {
        let s = setup(16, 17);
        let g = *s.grid();
        let w = Surface::from_fn(&g, |x, y| 0.05 * (TWO_PI * x).sin() * (2.0 * TWO_PI * y).cos());
        let geom = GeometryState::build(&s, &w, &Surface::zeros(&g), DEFAULT_C_MIN, 0.5).unwrap();
        let r = piola_residual(&s, &geom.f);
        assert!(r[0] < 1e-12 && r[1] < 1e-12 && r[2] == 0.0, "{r:?}");
    }
}
