//! ALE Euler step, boundary conditions, divergence cleanup and vorticity.
//!
//! The momentum equation in reference coordinates is
//!
//! ```text
//! ∂ₜvᵢ + v₁Eⱼ₁∂ⱼvᵢ + v₂Eⱼ₂∂ⱼvᵢ + (v₃ - ψₜ)/J ∂₃vᵢ + Eₖᵢ∂ₖq = 0
//! ```
//!
//! and is advanced with the explicit midpoint rule, solving the pressure
//! problem at both stages.

use std::collections::HashMap;

use crate::diagnostics::{sobolev_surface, sobolev_volume};
use crate::error::FluidError;
use crate::geometry::GeometryState;
use crate::grid::{Grid, Surface, Volume};
use crate::plate::{PlateParams, PlateState};
use crate::pressure::{
    advection, assemble_pressure_problem, divergence, gradient, normalize_surface_mean, solve_robin_neumann,
    PressureConfig, PressureSolution,
};
use crate::spectral::Spectral;

pub type VectorField = [Volume; 3];

pub fn zero_vector(grid: &Grid) -> VectorField {
    [Volume::zeros(grid), Volume::zeros(grid), Volume::zeros(grid)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidConfig {
    pub pressure: PressureConfig,
    pub cfl_max: f64,
    pub divergence_cleanup: bool,
    /// Upper bound on cleanup projections per step.
    pub cleanup_passes: usize,
}

impl Default for FluidConfig {
    fn default() -> Self {
        Self {
            pressure: PressureConfig::default(),
            cfl_max: 0.5,
            divergence_cleanup: true,
            cleanup_passes: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub v: VectorField,
    /// Pressure of the last stage, normalised to zero mean on `Γ1`.
    pub q: Volume,
    pub t: f64,
}

impl FluidState {
    pub fn at_rest(grid: &Grid) -> Self {
        Self {
            v: zero_vector(grid),
            q: Volume::zeros(grid),
            t: 0.0,
        }
    }
}

/// `Eₘᵢ ∂ₘ f`, the physical gradient pulled back to the reference domain.
pub fn ale_gradient(spec: &Spectral, f: &Volume, geom: &GeometryState) -> VectorField {
    let [g1, g2, g3] = gradient(spec, f);
    let n = f.len();
    let row = |i: usize| {
        Volume(
            (0..n)
                .map(|p| geom.e[0][i][p] * g1[p] + geom.e[1][i][p] * g2[p] + geom.e[2][i][p] * g3[p])
                .collect(),
        )
    };
    [row(0), row(1), row(2)]
}

/// `∂ₖ(Fₖᵢ vᵢ)`, which equals `J Eₖᵢ ∂ₖ vᵢ` by the Piola identity.
pub fn weighted_divergence(spec: &Spectral, v: &VectorField, geom: &GeometryState) -> Volume {
    let n = v[0].len();
    let flux = |k: usize| {
        Volume(
            (0..n)
                .map(|p| (0..3).map(|i| geom.f[k][i][p] * v[i][p]).sum())
                .collect(),
        )
    };
    divergence(spec, &[flux(0), flux(1), flux(2)])
}

/// ALE divergence `Eₖᵢ ∂ₖ vᵢ`, evaluated in the conservative form
/// `J⁻¹ ∂ₖ(Fₖᵢ vᵢ)` so that the mean of each level satisfies a discrete Gauss
/// identity against the wall fluxes.
pub fn ale_divergence(spec: &Spectral, v: &VectorField, geom: &GeometryState) -> Volume {
    weighted_divergence(spec, v, geom).mul(geom.inv_j())
}

/// Max of the ALE divergence over interior levels.
pub fn divergence_interior(spec: &Spectral, v: &VectorField, geom: &GeometryState) -> f64 {
    ale_divergence(spec, v, geom).max_abs_interior(spec.grid())
}

/// Right side of the momentum equation, dealiased level by level.
pub fn momentum_rhs(spec: &Spectral, v: &VectorField, q: &Volume, geom: &GeometryState) -> VectorField {
    let adv = advection(spec, v, geom);
    let gq = ale_gradient(spec, q, geom);
    let f = |i: usize| spec.dealias_volume(&adv[i].add(&gq[i]).scaled(-1.0));
    [f(0), f(1), f(2)]
}

/// `dt · max(|v₁|/Δx₁ + |v₂|/Δx₂ + |v₃ - ψₜ|/(J Δz))`
pub fn cfl_number(spec: &Spectral, v: &VectorField, geom: &GeometryState, dt: f64) -> f64 {
    let g = spec.grid();
    let (i1, i2, i3) = (1.0 / g.dx1(), 1.0 / g.dx2(), 1.0 / g.dz());
    let mut worst = 0.0_f64;
    for p in 0..v[0].len() {
        let s = v[0][p].abs() * i1 + v[1][p].abs() * i2 + ((v[2][p] - geom.psi_t[p]) * geom.e[2][2][p]).abs() * i3;
        worst = worst.max(s);
    }
    worst * dt
}

fn check_cfl(spec: &Spectral, v: &VectorField, geom: &GeometryState, dt: f64, limit: f64) -> Result<(), FluidError> {
    let number = cfl_number(spec, v, geom, dt);
    if !number.is_finite() {
        return Err(FluidError::NonFinite);
    }
    if number > limit {
        return Err(FluidError::Cfl {
            number,
            limit,
            suggested_dt: dt * limit / number,
        });
    }
    Ok(())
}

/// Sets `v₃ = 0` on `Γ0` and `F₃ᵢvᵢ = w_t` on `Γ1` by adjusting `v₃` only.
pub fn impose_boundary_conditions(grid: &Grid, v: &mut VectorField, geom: &GeometryState, w_t: &Surface) {
    let m = grid.plane();
    let top = (grid.n3 - 1) * m;
    for p in 0..m {
        v[2][p] = 0.0;
        let n = top + p;
        v[2][n] = (w_t[p] + geom.dpsi[0][n] * v[0][n] + geom.dpsi[1][n] * v[1][n]) / geom.f[2][2][n];
    }
}

/// Dense LU factorisation with partial pivoting.
#[derive(Debug, Clone)]
struct Lu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    fn factor(n: usize, mut a: Vec<f64>) -> Self {
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut best, mut at) = (0.0, k);
            for r in k..n {
                if a[r * n + k].abs() > best {
                    best = a[r * n + k].abs();
                    at = r;
                }
            }
            if at != k {
                for c in 0..n {
                    a.swap(k * n + c, at * n + c);
                }
                piv.swap(k, at);
            }
            let d = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / d;
                a[r * n + k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        a[r * n + c] -= f * a[k * n + c];
                    }
                }
            }
        }
        Self { n, a, piv }
    }

    fn solve(&self, b: &[num_complex::Complex64]) -> Vec<num_complex::Complex64> {
        let n = self.n;
        let mut x: Vec<_> = self.piv.iter().map(|&i| b[i]).collect();
        for r in 0..n {
            for c in 0..r {
                let f = self.a[r * n + c];
                let xc = x[c];
                x[r] -= xc * f;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let f = self.a[r * n + c];
                let xc = x[c];
                x[r] -= xc * f;
            }
            x[r] /= self.a[r * n + r];
        }
        x
    }
}

/// Exact inverse of the flat-geometry cleanup operator `D·D` (same vertical
/// stencil as the divergence, hence not the compact `D₃₃`) with conormal rows
/// on both walls. Modes whose horizontal first-derivative symbols vanish are
/// pinned by fixing their top value.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: Grid,
    factors: Vec<Lu>,
    mode_factor: Vec<usize>,
}

fn first_derivative_matrix(n: usize, dz: f64) -> Vec<f64> {
    let mut d = vec![0.0; n * n];
    let inv = 1.0 / (2.0 * dz);
    d[0] = -3.0 * inv;
    d[1] = 4.0 * inv;
    d[2] = -inv;
    for l in 1..n - 1 {
        d[l * n + l - 1] = -inv;
        d[l * n + l + 1] = inv;
    }
    let t = (n - 1) * n;
    d[t + n - 1] = 3.0 * inv;
    d[t + n - 2] = -4.0 * inv;
    d[t + n - 3] = inv;
    d
}

impl Projector {
    pub fn new(spec: &Spectral) -> Self {
        let grid = *spec.grid();
        let n = grid.n3;
        let d = first_derivative_matrix(n, grid.dz());
        let mut cache: HashMap<(u64, bool), usize> = HashMap::new();
        let mut factors = Vec::new();
        let mut mode_factor = Vec::with_capacity(grid.plane());
        for p in 0..grid.plane() {
            let k2 = spec.derivative_symbol(p, 1, 0).norm_sqr() + spec.derivative_symbol(p, 0, 1).norm_sqr();
            let pinned = k2 == 0.0;
            let key = (k2.to_bits(), pinned);
            let idx = *cache.entry(key).or_insert_with(|| {
                let mut a = vec![0.0; n * n];
                a[..n].copy_from_slice(&d[..n]);
                for l in 1..n - 1 {
                    for c in 0..n {
                        let dd: f64 = (0..n).map(|j| d[l * n + j] * d[j * n + c]).sum();
                        a[l * n + c] = dd;
                    }
                    a[l * n + l] -= k2;
                }
                if pinned {
                    a[(n - 1) * n + n - 1] = 1.0;
                } else {
                    a[(n - 1) * n..].copy_from_slice(&d[(n - 1) * n..]);
                }
                factors.push(Lu::factor(n, a));
                factors.len() - 1
            });
            mode_factor.push(idx);
        }
        Self {
            grid,
            factors,
            mode_factor,
        }
    }

    /// Solves the flat operator for interior data `r` and wall data.
    fn solve_flat(&self, spec: &Spectral, r: &Volume, top: &Surface, bottom: &Surface) -> Volume {
        let g = self.grid;
        let m = g.plane();
        let n = g.n3;
        let rc = spec.forward_volume(r);
        let tc = spec.forward(&top.0);
        let bc = spec.forward(&bottom.0);
        let mut out = vec![num_complex::Complex64::new(0.0, 0.0); g.volume()];
        let mut b = vec![num_complex::Complex64::new(0.0, 0.0); n];
        for p in 0..m {
            b[0] = bc[p];
            for l in 1..n - 1 {
                b[l] = rc[l * m + p];
            }
            let lu = &self.factors[self.mode_factor[p]];
            b[n - 1] = tc[p];
            let x = lu.solve(&b);
            for (l, v) in x.into_iter().enumerate() {
                out[l * m + p] = v;
            }
        }
        spec.inverse_volume(&out)
    }
}

/// Projects `v` towards the kernel of the discrete ALE divergence on interior
/// nodes, leaving the normal flux `F₃ᵢvᵢ` on both walls unchanged. Returns the
/// corrected field and the interior divergence before and after.
pub fn divergence_cleanup(
    spec: &Spectral,
    projector: &Projector,
    v: &VectorField,
    geom: &GeometryState,
) -> (VectorField, f64, f64) {
    let grid = *spec.grid();
    let before = divergence_interior(spec, v, geom);
    if before == 0.0 {
        return (v.clone(), 0.0, 0.0);
    }
    let data = weighted_divergence(spec, v, geom);
    let zero = Surface::zeros(&grid);
    let apply = |phi: &Volume| -> (Volume, Surface, Surface) {
        let gphi = ale_gradient(spec, phi, geom);
        let interior = weighted_divergence(spec, &gphi, geom);
        let flux = |l: usize| {
            let m = grid.plane();
            Surface(
                (0..m)
                    .map(|p| {
                        let n = l * m + p;
                        (0..3).map(|i| geom.f[2][i][n] * gphi[i][n]).sum()
                    })
                    .collect(),
            )
        };
        (interior, flux(grid.n3 - 1), flux(0))
    };
    let mut phi = projector.solve_flat(spec, &data, &zero, &zero);
    // stop at the tolerance or once the update stalls at roundoff
    let mut prev = f64::INFINITY;
    for _ in 0..40 {
        let (ai, at, ab) = apply(&phi);
        let ri = data.sub(&ai);
        let delta = projector.solve_flat(spec, &ri, &at.scaled(-1.0), &ab.scaled(-1.0));
        let size = phi.max_abs();
        let d = delta.max_abs();
        phi = phi.add(&delta);
        if d <= 1e-14 * size || d >= prev {
            break;
        }
        prev = d;
    }
    let gphi = ale_gradient(spec, &phi, geom);
    let out = [v[0].sub(&gphi[0]), v[1].sub(&gphi[1]), v[2].sub(&gphi[2])];
    let after = divergence_interior(spec, &out, geom);
    (out, before, after)
}

/// Geometry and plate data bracketing one fluid step.
#[derive(Debug, Clone, Copy)]
pub struct StepData<'a> {
    pub geom_start: &'a GeometryState,
    pub geom_mid: &'a GeometryState,
    pub geom_end: &'a GeometryState,
    pub plate_start: &'a PlateState,
    pub plate_mid: &'a PlateState,
    pub plate_end: &'a PlateState,
}

#[derive(Debug, Clone)]
pub struct FluidStepOutput {
    pub state: FluidState,
    /// Pressure of the second stage before normalisation.
    pub stage_pressure: PressureSolution,
    /// Top trace of the normalised second-stage pressure; the plate forcing.
    pub plate_forcing: Surface,
    pub pressure_iterations: usize,
    pub divergence_before_cleanup: f64,
    pub divergence: f64,
}

/// Pressure and momentum right-hand side at the start of a step.
#[derive(Debug, Clone)]
pub struct FirstStage {
    pub solution: PressureSolution,
    pub rhs: VectorField,
}

/// Fluid integrator bound to one grid.
#[derive(Debug, Clone)]
pub struct FluidSolver {
    spec: Spectral,
    pub cfg: FluidConfig,
    projector: Projector,
}

impl FluidSolver {
    pub fn new(spec: Spectral, cfg: FluidConfig) -> Self {
        let projector = Projector::new(&spec);
        Self { spec, cfg, projector }
    }

    pub fn spec(&self) -> &Spectral {
        &self.spec
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    /// Solves and normalises the pressure for one state.
    pub fn solve_pressure(
        &self,
        v: &VectorField,
        geom: &GeometryState,
        plate: &PlateState,
        params: &PlateParams,
        warm: Option<&Volume>,
    ) -> Result<(Volume, PressureSolution), FluidError> {
        let problem = assemble_pressure_problem(&self.spec, v, geom, plate, params);
        let sol = solve_robin_neumann(&self.spec, &problem, &self.cfg.pressure, warm)?;
        let (q, _) = normalize_surface_mean(self.spec.grid(), &sol.q);
        Ok((q, sol))
    }

    /// First stage of the midpoint rule; it depends only on the start state,
    /// so the coupling loop computes it once per step.
    pub fn first_stage(
        &self,
        state: &FluidState,
        geom: &GeometryState,
        plate: &PlateState,
        params: &PlateParams,
        dt: f64,
    ) -> Result<FirstStage, FluidError> {
        check_cfl(&self.spec, &state.v, geom, dt, self.cfg.cfl_max)?;
        let (q, solution) = self.solve_pressure(&state.v, geom, plate, params, Some(&state.q))?;
        let rhs = momentum_rhs(&self.spec, &state.v, &q, geom);
        Ok(FirstStage { solution, rhs })
    }

    /// One explicit midpoint step from `state` over `[t, t + dt]`.
    pub fn step(
        &self,
        state: &FluidState,
        data: StepData<'_>,
        params: &PlateParams,
        dt: f64,
    ) -> Result<FluidStepOutput, FluidError> {
        let first = self.first_stage(state, data.geom_start, data.plate_start, params, dt)?;
        let mut out = self.step_from(state, &first, data, params, dt)?;
        out.pressure_iterations += first.solution.history.len();
        Ok(out)
    }

    /// Completes a step whose first stage is already known.
    pub fn step_from(
        &self,
        state: &FluidState,
        first: &FirstStage,
        data: StepData<'_>,
        params: &PlateParams,
        dt: f64,
    ) -> Result<FluidStepOutput, FluidError> {
        let spec = &self.spec;
        let grid = *spec.grid();
        let (s1, k1) = (&first.solution, &first.rhs);
        let half: VectorField = [0, 1, 2].map(|i| Volume::lincomb(1.0, &state.v[i], 0.5 * dt, &k1[i]));

        let (q2, s2) = self.solve_pressure(&half, data.geom_mid, data.plate_mid, params, Some(&s1.q))?;
        let k2 = momentum_rhs(spec, &half, &q2, data.geom_mid);
        let mut v: VectorField = [0, 1, 2].map(|i| Volume::lincomb(1.0, &state.v[i], dt, &k2[i]));

        impose_boundary_conditions(&grid, &mut v, data.geom_end, &data.plate_end.w_t);
        let mut before = divergence_interior(spec, &v, data.geom_end);
        let mut after = before;
        if self.cfg.divergence_cleanup {
            for pass in 0..self.cfg.cleanup_passes {
                let (cleaned, b, a) = divergence_cleanup(spec, &self.projector, &v, data.geom_end);
                if pass == 0 {
                    before = b;
                }
                v = cleaned;
                impose_boundary_conditions(&grid, &mut v, data.geom_end, &data.plate_end.w_t);
                after = divergence_interior(spec, &v, data.geom_end);
                if after <= 1e-12 || a >= b {
                    break;
                }
            }
        }
        if !v.iter().all(|f| f.is_finite()) {
            return Err(FluidError::NonFinite);
        }
        let plate_forcing = q2.top(&grid);
        Ok(FluidStepOutput {
            state: FluidState {
                v,
                q: q2,
                t: state.t + dt,
            },
            pressure_iterations: s2.history.len(),
            stage_pressure: s2,
            plate_forcing,
            divergence_before_cleanup: before,
            divergence: after,
        })
    }
}

/// ALE vorticity `ζᵢ = εᵢⱼₖ Eₘⱼ ∂ₘ vₖ`.
pub fn ale_vorticity(spec: &Spectral, v: &VectorField, geom: &GeometryState) -> VectorField {
    // gk[k][j] = Eₘⱼ ∂ₘ vₖ
    let gk: Vec<VectorField> = v.iter().map(|vk| ale_gradient(spec, vk, geom)).collect();
    [
        gk[2][1].sub(&gk[1][2]),
        gk[0][2].sub(&gk[2][0]),
        gk[1][0].sub(&gk[0][1]),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct VorticityState {
    pub zeta: VectorField,
    pub theta: VectorField,
}

impl VorticityState {
    /// Starts the transported copy from the vorticity of `v`.
    pub fn new(spec: &Spectral, v: &VectorField, geom: &GeometryState) -> Self {
        let zeta = ale_vorticity(spec, v, geom);
        Self {
            theta: zeta.clone(),
            zeta,
        }
    }

    /// `‖ζ - θ‖₂ / ‖ζ‖₂`
    pub fn mismatch(&self, grid: &Grid) -> f64 {
        let num: f64 = (0..3).map(|i| self.zeta[i].sub(&self.theta[i]).l2(grid).powi(2)).sum();
        let den: f64 = (0..3).map(|i| self.zeta[i].l2(grid).powi(2)).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// `-Aθ + θₖEₘₖ∂ₘv`: advection by the ALE transport velocity plus stretching.
fn vorticity_rhs(spec: &Spectral, theta: &VectorField, v: &VectorField, geom: &GeometryState) -> VectorField {
    let adv = advection_of(spec, theta, v, geom);
    let gv: Vec<VectorField> = v.iter().map(|vi| ale_gradient(spec, vi, geom)).collect();
    let n = v[0].len();
    let f = |i: usize| {
        let stretch = Volume(
            (0..n)
                .map(|p| theta[0][p] * gv[i][0][p] + theta[1][p] * gv[i][1][p] + theta[2][p] * gv[i][2][p])
                .collect(),
        );
        spec.dealias_volume(&stretch.sub(&adv[i]))
    };
    [f(0), f(1), f(2)]
}

/// `v₁Eⱼ₁∂ⱼθᵢ + v₂Eⱼ₂∂ⱼθᵢ + (v₃ - ψₜ)/J ∂₃θᵢ`
fn advection_of(spec: &Spectral, theta: &VectorField, v: &VectorField, geom: &GeometryState) -> VectorField {
    let n = v[0].len();
    let adv = |t: &Volume| {
        let [g1, g2, g3] = gradient(spec, t);
        Volume(
            (0..n)
                .map(|p| {
                    v[0][p] * (g1[p] + geom.e[2][0][p] * g3[p])
                        + v[1][p] * (g2[p] + geom.e[2][1][p] * g3[p])
                        + (v[2][p] - geom.psi_t[p]) * geom.e[2][2][p] * g3[p]
                })
                .collect(),
        )
    };
    [adv(&theta[0]), adv(&theta[1]), adv(&theta[2])]
}

/// Advances `θ` over one step with `v` and the geometry frozen at the start of
/// the step. `ζ` is left untouched; refresh it from the new velocity.
pub fn vorticity_transport_step(
    spec: &Spectral,
    vort: &VorticityState,
    v: &VectorField,
    geom: &GeometryState,
    dt: f64,
) -> VorticityState {
    let k1 = vorticity_rhs(spec, &vort.theta, v, geom);
    let half: VectorField = [0, 1, 2].map(|i| Volume::lincomb(1.0, &vort.theta[i], 0.5 * dt, &k1[i]));
    let k2 = vorticity_rhs(spec, &half, v, geom);
    VorticityState {
        zeta: vort.zeta.clone(),
        theta: [0, 1, 2].map(|i| Volume::lincomb(1.0, &vort.theta[i], dt, &k2[i])),
    }
}

/// Terms of the div-curl inequality for `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivCurlNorms {
    pub curl_norm: f64,
    pub div_norm: f64,
    pub trace_norm: f64,
    pub l2_norm: f64,
    pub h35_proxy: f64,
}

impl DivCurlNorms {
    /// `‖v‖_{H^3.5}` divided by the sum of the right-hand terms.
    pub fn ratio(&self) -> f64 {
        let rhs = self.curl_norm + self.div_norm + self.trace_norm + self.l2_norm;
        if rhs > 0.0 {
            self.h35_proxy / rhs
        } else {
            0.0
        }
    }
}

pub fn divcurl_norms(spec: &Spectral, v: &VectorField, geom: &GeometryState) -> DivCurlNorms {
    let grid = *spec.grid();
    let m = grid.plane();
    let top = grid.n3 - 1;
    let vec_norm = |f: &VectorField, s: f64| {
        f.iter()
            .map(|c| sobolev_volume(spec, c, s, 2).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let normal_top = Surface(
        (0..m)
            .map(|p| {
                let n = top * m + p;
                (0..3).map(|i| geom.f[2][i][n] * v[i][n]).sum()
            })
            .collect(),
    );
    let normal_bottom = v[2].bottom(&grid);
    let trace =
        (sobolev_surface(spec, &normal_top, 3.0).powi(2) + sobolev_surface(spec, &normal_bottom, 3.0).powi(2)).sqrt();
    let l2 = v.iter().map(|c| c.l2(&grid).powi(2)).sum::<f64>().sqrt();
    DivCurlNorms {
        curl_norm: vec_norm(&ale_vorticity(spec, v, geom), 2.5),
        div_norm: sobolev_volume(spec, &ale_divergence(spec, v, geom), 2.5, 2),
        trace_norm: trace,
        l2_norm: l2,
        h35_proxy: vec_norm(v, 3.5),
    }
}
