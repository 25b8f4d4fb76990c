//! Discrete Sobolev norms, energy bookkeeping and the a priori monitor.
//!
//! Fractional horizontal regularity is measured with the symbol
//! `(1 + |2πk|²)^s`; vertical regularity with up to two applications of the
//! finite-difference operators, integrated with the trapezoid rule. Each
//! vertical derivative lowers the horizontal exponent by one.

use crate::geometry::{piola_residual, GeometryState};
use crate::grid::{d3, d33, Surface, Volume};
use crate::plate::{koiter_energy, PlateParams, PlateState};
use crate::spectral::Spectral;

/// `‖f‖_{H^s(T²)}` as `(Σ_k (1 + |2πk|²)^s |f̂_k|²)^{1/2}`.
pub fn sobolev_surface(spec: &Spectral, f: &Surface, s: f64) -> f64 {
    let c = spec.forward(&f.0);
    c.iter()
        .enumerate()
        .map(|(p, z)| spec.lambda_symbol(p, 2.0 * s) * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Volume proxy `(Σ_j ‖Λ^{s-j} D₃^j f‖²)^{1/2}` over `j = 0..=order` (order at
/// most 2), each level integrated in `x3`. Every vertical derivative trades
/// one horizontal power, as in the anisotropic form of `H^s`.
pub fn sobolev_volume(spec: &Spectral, f: &Volume, s: f64, order: usize) -> f64 {
    let grid = *spec.grid();
    let m = grid.plane();
    let wz = grid.vertical_weights();
    let mut fields = vec![f.clone()];
    if order >= 1 {
        fields.push(d3(&grid, f));
    }
    if order >= 2 {
        fields.push(d33(&grid, f));
    }
    let mut total = 0.0;
    for (j, g) in fields.iter().enumerate() {
        if g.max_abs() == 0.0 {
            continue;
        }
        let sj = (s - j as f64).max(0.0);
        let weights: Vec<f64> = (0..m).map(|p| spec.lambda_symbol(p, 2.0 * sj)).collect();
        for (l, w) in wz.iter().enumerate() {
            let c = spec.forward(g.level(&grid, l));
            let level: f64 = c.iter().zip(&weights).map(|(z, a)| a * z.norm_sqr()).sum();
            total += w * level;
        }
    }
    total.sqrt()
}

/// Vertical order used for an `H^s` volume proxy: `min(2, ⌊s⌋)`.
pub fn vertical_order(s: f64) -> usize {
    (s.floor().max(0.0) as usize).min(2)
}

fn volume_proxy(spec: &Spectral, f: &Volume, s: f64) -> f64 {
    sobolev_volume(spec, f, s, vertical_order(s))
}

fn combined(spec: &Spectral, fields: &[&Volume], s: f64) -> f64 {
    fields
        .iter()
        .map(|f| volume_proxy(spec, f, s).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Norms and energies recorded once per output step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormReport {
    pub v_h35: f64,
    pub w_h5: f64,
    pub wt_h3: f64,
    pub q_h25: f64,
    pub psi_h55: f64,
    pub psit_h35: f64,
    pub e_h45: f64,
    pub e_minus_i_sup: f64,
    pub j_minus_1_sup: f64,
    pub kinetic: f64,
    pub koiter: f64,
    pub total_energy: f64,
    pub interface_residual: f64,
    pub piola_residual: f64,
}

impl NormReport {
    /// Column names in output order.
    pub const FIELDS: [&'static str; 14] = [
        "v_H3.5",
        "w_H5",
        "wt_H3",
        "q_H2.5",
        "psi_H5.5",
        "psit_H3.5",
        "E_H4.5",
        "E_minus_I_sup",
        "J_minus_1_sup",
        "kinetic",
        "koiter",
        "total_energy",
        "interface_residual",
        "piola_residual",
    ];

    pub fn values(&self) -> [f64; 14] {
        [
            self.v_h35,
            self.w_h5,
            self.wt_h3,
            self.q_h25,
            self.psi_h55,
            self.psit_h35,
            self.e_h45,
            self.e_minus_i_sup,
            self.j_minus_1_sup,
            self.kinetic,
            self.koiter,
            self.total_energy,
            self.interface_residual,
            self.piola_residual,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::FIELDS.iter().position(|f| *f == name).map(|i| self.values()[i])
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.is_finite())
    }
}

/// `½ ∫ J |v|²`, the fluid kinetic energy in the physical domain.
pub fn kinetic_energy(spec: &Spectral, v: &[Volume; 3], geom: &GeometryState) -> f64 {
    let grid = *spec.grid();
    let density = Volume(
        (0..grid.volume())
            .map(|p| geom.j[p] * (v[0][p].powi(2) + v[1][p].powi(2) + v[2][p].powi(2)))
            .collect(),
    );
    0.5 * density.integral(&grid)
}

/// `max |F₃ᵢ vᵢ - w_t|` on the top wall.
pub fn interface_residual(spec: &Spectral, v: &[Volume; 3], w_t: &Surface, geom: &GeometryState) -> f64 {
    let grid = *spec.grid();
    let top = grid.n3 - 1;
    let m = grid.plane();
    (0..m)
        .map(|p| {
            let n = top * m + p;
            let flux = geom.f[2][0][n] * v[0][n] + geom.f[2][1][n] * v[1][n] + geom.f[2][2][n] * v[2][n];
            (flux - w_t[p]).abs()
        })
        .fold(0.0, f64::max)
}

/// Full set of norms for one state.
pub fn energy_report(
    spec: &Spectral,
    params: &PlateParams,
    plate: &PlateState,
    v: &[Volume; 3],
    q: &Volume,
    geom: &GeometryState,
) -> NormReport {
    let kinetic = kinetic_energy(spec, v, geom);
    let koiter = koiter_energy(spec, &plate.w, params);
    let plate_kinetic = 0.5 * params.mass() * plate.w_t.l2().powi(2);
    let e_fields: Vec<&Volume> = geom.e.iter().flatten().collect();
    NormReport {
        v_h35: combined(spec, &[&v[0], &v[1], &v[2]], 3.5),
        w_h5: sobolev_surface(spec, &plate.w, 5.0),
        wt_h3: sobolev_surface(spec, &plate.w_t, 3.0),
        q_h25: volume_proxy(spec, q, 2.5),
        psi_h55: volume_proxy(spec, &geom.psi, 5.5),
        psit_h35: volume_proxy(spec, &geom.psi_t, 3.5),
        e_h45: combined(spec, &e_fields, 4.5),
        e_minus_i_sup: geom.epsilon_report.e_minus_i_sup,
        j_minus_1_sup: geom.epsilon_report.j_minus_1_sup,
        kinetic,
        koiter,
        total_energy: kinetic + plate_kinetic + koiter,
        interface_residual: interface_residual(spec, v, &plate.w_t, geom),
        piola_residual: piola_residual(spec, &geom.f).into_iter().fold(0.0, f64::max),
    }
}

/// Default constant in the a priori bound `‖·‖ ≤ C₀ M`.
pub const DEFAULT_C0: f64 = 10.0;

/// Proxies checked by the a priori monitor.
pub const MONITORED: [&str; 6] = ["v_H3.5", "w_H5", "wt_H3", "q_H2.5", "psi_H5.5", "psit_H3.5"];

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorEntry {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    /// `bound / value`; below one means the bound is violated.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub m: f64,
    pub c0: f64,
    pub entries: Vec<MonitorEntry>,
    pub within: bool,
}

/// Size of the initial data, `max(‖v₀‖_{H^3.5}, ‖w₁‖_{H^3}, 1)`.
pub fn data_size(initial: &NormReport) -> f64 {
    initial.v_h35.max(initial.wt_h3).max(1.0)
}

/// Checks each monitored proxy against `C₀ M`.
pub fn apriori_monitor(report: &NormReport, m: f64, c0: f64) -> MonitorReport {
    let bound = c0 * m;
    let entries: Vec<MonitorEntry> = MONITORED
        .iter()
        .map(|&name| {
            let value = report.get(name).expect("monitored field");
            let margin = if value > 0.0 { bound / value } else { f64::INFINITY };
            MonitorEntry {
                name,
                value,
                bound,
                margin,
            }
        })
        .collect();
    let within = entries.iter().all(|e| e.value <= e.bound);
    MonitorReport { m, c0, entries, within }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::spectral::TWO_PI;

    fn spec() -> Spectral {
        Spectral::new(Grid::new(16, 16, 17).unwrap())
    }

    #[test]
    fn surface_norm_of_single_mode() {
        let s = spec();
        let g = *s.grid();
        let f = Surface::from_fn(&g, |x, _| (TWO_PI * 2.0 * x).cos());
        let expect = ((1.0 + (2.0 * TWO_PI).powi(2)).powf(3.0) * 0.5).sqrt();
        assert!((sobolev_surface(&s, &f, 3.0) - expect).abs() < 1e-9 * expect);
        assert!((sobolev_surface(&s, &f, 0.0) - f.l2()).abs() < 1e-14);
    }

    #[test]
    fn volume_norm_of_level_constant() {
        let s = spec();
        let g = *s.grid();
        let f = Volume::from_fn(&g, |_, y, _| (TWO_PI * y).sin());
        let expect = ((1.0 + TWO_PI * TWO_PI).powf(2.5) * 0.5).sqrt();
        assert!((sobolev_volume(&s, &f, 2.5, 2) - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn vertical_derivatives_contribute() {
        let s = spec();
        let g = *s.grid();
        let f = Volume::x3(&g);
        // ∫ z² + ∫ 1 = 4/3 up to trapezoid error dz²/6
        let v = sobolev_volume(&s, &f, 1.0, 1).powi(2);
        assert!((v - (4.0 / 3.0 + g.dz().powi(2) / 6.0)).abs() < 1e-12);
        assert_eq!(vertical_order(3.5), 2);
        assert_eq!(vertical_order(0.5), 0);
    }

    #[test]
    fn vertical_derivative_loses_one_horizontal_power() {
        let s = spec();
        let g = *s.grid();
        let f = Volume::from_fn(&g, |x, _, z| (TWO_PI * x).cos() * z);
        let zz = 1.0 / 3.0 + g.dz().powi(2) / 6.0;
        let expect = 0.5 * (1.0 + TWO_PI * TWO_PI) * zz + 0.5;
        assert!((sobolev_volume(&s, &f, 1.0, 1).powi(2) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn monitor_flags_large_values() {
        let r = NormReport {
            v_h35: 3.0,
            q_h25: 20.0,
            ..NormReport::default()
        };
        let m = data_size(&r);
        assert_eq!(m, 3.0);
        let out = apriori_monitor(&r, m, 10.0);
        assert!(out.within);
        let out = apriori_monitor(&r, m, 1.0);
        assert!(!out.within);
        let q = out.entries.iter().find(|e| e.name == "q_H2.5").unwrap();
        assert!((q.margin - 3.0 / 20.0).abs() < 1e-15);
    }
}
