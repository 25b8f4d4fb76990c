//! Variable-coefficient pressure problem in the reference channel.
//!
//! ```text
//! ∂ⱼ(dⱼₖ ∂ₖ q) = ∂ⱼ fⱼ + s        in Ω
//! d₃ₖ ∂ₖ q + α q = g1            on Γ1
//! d₃ₖ ∂ₖ q       = g0            on Γ0
//! ```
//!
//! with `dⱼₖ = Fⱼᵢ Eₖᵢ` and `α = 1/h`. It is solved by a fixed point around the
//! identity coefficient: every sweep is a Laplace problem with the perturbation
//! `(d - I)∇q` moved to the data, and the Laplace problem decouples into one
//! tridiagonal vertical solve per horizontal Fourier mode.

use num_complex::Complex64;

use crate::error::PressureError;
use crate::geometry::{GeometryState, MatrixField};
use crate::grid::{d3, d33, Grid, Surface, Volume};
use crate::plate::{elastic_operator, PlateParams, PlateState};
use crate::spectral::Spectral;

/// Largest `‖d - I‖_∞` the fixed point accepts.
pub const ITERATION_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PressureConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticProblem {
    /// Symmetric coefficient `dⱼₖ`.
    pub d: MatrixField,
    /// Flux in divergence form.
    pub f: [Volume; 3],
    /// Additional scalar source in the interior equation.
    pub s: Volume,
    pub g1: Surface,
    pub g0: Surface,
    /// `α` in the top condition; zero gives a pure Neumann problem.
    pub robin_coefficient: f64,
    /// `max |dⱼₖ - δⱼₖ|`
    pub deviation: f64,
}

fn identity_deviation(d: &MatrixField) -> f64 {
    let mut worst = 0.0_f64;
    for (a, row) in d.iter().enumerate() {
        for (b, field) in row.iter().enumerate() {
            let t = if a == b { 1.0 } else { 0.0 };
            worst = field.0.iter().fold(worst, |m, x| m.max((x - t).abs()));
        }
    }
    worst
}

impl EllipticProblem {
    pub fn new(d: MatrixField, f: [Volume; 3], s: Volume, g1: Surface, g0: Surface, robin_coefficient: f64) -> Self {
        let deviation = identity_deviation(&d);
        Self {
            d,
            f,
            s,
            g1,
            g0,
            robin_coefficient,
            deviation,
        }
    }

    /// Laplace problem with no data.
    pub fn identity(grid: &Grid, robin_coefficient: f64) -> Self {
        let z = Volume::zeros(grid);
        let one = Volume::constant(grid, 1.0);
        let d = [
            [one.clone(), z.clone(), z.clone()],
            [z.clone(), one.clone(), z.clone()],
            [z.clone(), z.clone(), one],
        ];
        Self::new(
            d,
            [z.clone(), z.clone(), z.clone()],
            z,
            Surface::zeros(grid),
            Surface::zeros(grid),
            robin_coefficient,
        )
    }
}

/// `dⱼₖ = Fⱼᵢ Eₖᵢ = J (E Eᵀ)ⱼₖ`.
pub fn coefficient_matrix(geom: &GeometryState) -> MatrixField {
    let n = geom.j.len();
    let entry = |a: usize, b: usize| {
        Volume(
            (0..n)
                .map(|p| (0..3).map(|i| geom.f[a][i][p] * geom.e[b][i][p]).sum())
                .collect(),
        )
    };
    [
        [entry(0, 0), entry(0, 1), entry(0, 2)],
        [entry(1, 0), entry(1, 1), entry(1, 2)],
        [entry(2, 0), entry(2, 1), entry(2, 2)],
    ]
}

/// Gradient with spectral horizontal and finite-difference vertical parts.
pub fn gradient(spec: &Spectral, q: &Volume) -> [Volume; 3] {
    let (a, b) = spec.gradient_volume(q);
    [a, b, d3(spec.grid(), q)]
}

/// Divergence `∂₁g₁ + ∂₂g₂ + D₃g₃`.
pub fn divergence(spec: &Spectral, g: &[Volume; 3]) -> Volume {
    spec.deriv_volume(&g[0], 1, 0)
        .add(&spec.deriv_volume(&g[1], 0, 1))
        .add(&d3(spec.grid(), &g[2]))
}

/// `Δ₂ q + D₃₃ q`
pub fn laplacian(spec: &Spectral, q: &Volume) -> Volume {
    spec.deriv_volume(q, 2, 0)
        .add(&spec.deriv_volume(q, 0, 2))
        .add(&d33(spec.grid(), q))
}

fn perturbation_flux(d: &MatrixField, grad: &[Volume; 3]) -> [Volume; 3] {
    let n = grad[0].len();
    let row = |a: usize| {
        Volume(
            (0..n)
                .map(|p| {
                    (0..3)
                        .map(|b| {
                            let t = if a == b { 1.0 } else { 0.0 };
                            (d[a][b][p] - t) * grad[b][p]
                        })
                        .sum()
                })
                .collect(),
        )
    };
    [row(0), row(1), row(2)]
}

/// Extracts the advective acceleration and ALE velocity terms shared by the
/// interior flux and the boundary data.
///
/// Returns `aᵢ = v₁ Eⱼ₁ ∂ⱼvᵢ + v₂ Eⱼ₂ ∂ⱼvᵢ + (v₃ - ψ_t)/J ∂₃vᵢ`.
pub fn advection(spec: &Spectral, v: &[Volume; 3], geom: &GeometryState) -> [Volume; 3] {
    let n = v[0].len();
    let adv = |vi: &Volume| {
        let [g1, g2, g3] = gradient(spec, vi);
        Volume(
            (0..n)
                .map(|p| {
                    let a1 = g1[p] + geom.e[2][0][p] * g3[p];
                    let a2 = g2[p] + geom.e[2][1][p] * g3[p];
                    let w3 = (v[2][p] - geom.psi_t[p]) * geom.e[2][2][p];
                    v[0][p] * a1 + v[1][p] * a2 + w3 * g3[p]
                })
                .collect(),
        )
    };
    [adv(&v[0]), adv(&v[1]), adv(&v[2])]
}

/// Assembles the pressure problem for the state `(v, geometry, plate)`.
pub fn assemble_pressure_problem(
    spec: &Spectral,
    v: &[Volume; 3],
    geom: &GeometryState,
    plate: &PlateState,
    params: &PlateParams,
) -> EllipticProblem {
    let grid = *spec.grid();
    let n = grid.volume();
    let adv = advection(spec, v, geom);
    let dtf: Vec<Vec<Volume>> = (0..3)
        .map(|a| (0..3).map(|b| geom.dt_f(&grid, a, b)).collect())
        .collect();
    let flux = |a: usize| {
        let raw = Volume(
            (0..n)
                .map(|p| {
                    (0..3)
                        .map(|i| dtf[a][i][p] * v[i][p] - geom.f[a][i][p] * adv[i][p])
                        .sum()
                })
                .collect(),
        );
        spec.dealias_volume(&raw)
    };
    let f = [flux(0), flux(1), flux(2)];
    let mass = params.mass();
    let elastic = elastic_operator(spec, &plate.w, params);
    let damping = spec.laplacian(&plate.w_t).scaled(params.nu);
    let g1 = elastic.sub(&damping).scaled(1.0 / mass).add(&f[2].top(&grid));
    let g0 = f[2].bottom(&grid);
    EllipticProblem::new(coefficient_matrix(geom), f, Volume::zeros(&grid), g1, g0, 1.0 / mass)
}

/// Boundary rows of the discrete operator: `D₃q + α q` on top, `D₃q` on the bottom.
fn boundary_functionals(grid: &Grid, q: &Volume, dq3: &Volume, alpha: f64) -> (Surface, Surface) {
    let top = dq3.top(grid).add(&q.top(grid).scaled(alpha));
    (top, dq3.bottom(grid))
}

/// Residual of `q` in the variable-coefficient problem, in max norm relative
/// to the size of the data.
pub fn pressure_residual(spec: &Spectral, problem: &EllipticProblem, q: &Volume) -> f64 {
    let grid = *spec.grid();
    let grad = gradient(spec, q);
    let pert = perturbation_flux(&problem.d, &grad);
    let lhs = laplacian(spec, q).add(&divergence(spec, &pert));
    let rhs = divergence(spec, &problem.f).add(&problem.s);
    let interior = lhs.sub(&rhs).max_abs_interior(&grid);
    let (bt, bb) = boundary_functionals(&grid, q, &grad[2], problem.robin_coefficient);
    let top = bt.add(&pert[2].top(&grid)).sub(&problem.g1).max_abs();
    let bottom = bb.add(&pert[2].bottom(&grid)).sub(&problem.g0).max_abs();
    let scale = rhs
        .max_abs_interior(&grid)
        .max(problem.g1.max_abs())
        .max(problem.g0.max_abs())
        .max(lhs.max_abs_interior(&grid));
    let worst = interior.max(top).max(bottom);
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Solves one vertical column for every horizontal mode:
/// `D₃₃x - κ²x = r` inside, `D₃x = b0` at the bottom, `D₃x + αx = b1` on top.
/// When `α = 0` the mean mode is made unique by fixing its top value to zero.
pub fn solve_laplace(spec: &Spectral, rhs: &Volume, b1: &Surface, b0: &Surface, alpha: f64) -> Volume {
    let grid = *spec.grid();
    let m = grid.plane();
    let nz = grid.n3;
    let dz = grid.dz();
    let dz2 = dz * dz;
    let r = spec.forward_volume(rhs);
    let t1 = spec.forward(&b1.0);
    let t0 = spec.forward(&b0.0);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.volume()];
    let mut sub = vec![0.0; nz];
    let mut diag = vec![0.0; nz];
    let mut sup = vec![0.0; nz];
    let mut y = vec![Complex64::new(0.0, 0.0); nz];
    for p in 0..m {
        let k2 = spec.kappa(p).powi(2);
        let rr = |l: usize| r[l * m + p];
        // bottom row after eliminating x₂ with the first interior equation
        diag[0] = -2.0;
        sup[0] = 2.0 - k2 * dz2;
        y[0] = t0[p] * (2.0 * dz) + rr(1) * dz2;
        for l in 1..nz - 1 {
            sub[l] = 1.0;
            diag[l] = -(2.0 + k2 * dz2);
            sup[l] = 1.0;
            y[l] = rr(l) * dz2;
        }
        let last = nz - 1;
        if alpha == 0.0 && p == 0 {
            sub[last] = 0.0;
            diag[last] = 1.0;
            y[last] = Complex64::new(0.0, 0.0);
        } else {
            sub[last] = k2 * dz2 - 2.0;
            diag[last] = 2.0 + 2.0 * dz * alpha;
            y[last] = t1[p] * (2.0 * dz) - rr(last - 1) * dz2;
        }
        let x = thomas(&sub, &diag, &sup, &y);
        for (l, v) in x.into_iter().enumerate() {
            out[l * m + p] = v;
        }
    }
    spec.inverse_volume(&out)
}

/// Tridiagonal solve without pivoting.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / den } else { 0.0 };
        d[i] = (rhs[i] - d[i - 1] * sub[i]) / den;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= next * c[i];
    }
    x
}

#[derive(Debug, Clone)]
pub struct PressureSolution {
    pub q: Volume,
    /// Relative update of each sweep.
    pub history: Vec<f64>,
    /// Geometric mean of consecutive update ratios after the first sweep.
    pub contraction: f64,
    pub residual: f64,
}

fn contraction_estimate(history: &[f64]) -> f64 {
    let ratios: Vec<f64> = history
        .windows(2)
        .skip(1)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.is_empty() {
        0.0
    } else {
        (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp()
    }
}

/// Fixed-point solve of the variable-coefficient problem, optionally warm
/// started from `initial`.
pub fn solve_robin_neumann(
    spec: &Spectral,
    problem: &EllipticProblem,
    cfg: &PressureConfig,
    initial: Option<&Volume>,
) -> Result<PressureSolution, PressureError> {
    let grid = *spec.grid();
    if !(problem.deviation <= ITERATION_RADIUS) {
        return Err(PressureError::Smallness {
            deviation: problem.deviation,
            radius: ITERATION_RADIUS,
        });
    }
    let base = divergence(spec, &problem.f).add(&problem.s);
    if !base.is_finite() || !problem.g1.is_finite() || !problem.g0.is_finite() {
        return Err(PressureError::NonFinite);
    }
    let data_zero = base.max_abs() == 0.0 && problem.g1.max_abs() == 0.0 && problem.g0.max_abs() == 0.0;
    let mut q = initial.cloned().unwrap_or_else(|| Volume::zeros(&grid));
    let mut history = Vec::new();
    let identity = problem.deviation == 0.0;
    for _ in 0..cfg.max_iter.max(1) {
        let (rhs, b1, b0) = if identity && q.max_abs() == 0.0 {
            (base.clone(), problem.g1.clone(), problem.g0.clone())
        } else {
            let pert = perturbation_flux(&problem.d, &gradient(spec, &q));
            (
                base.sub(&divergence(spec, &pert)),
                problem.g1.sub(&pert[2].top(&grid)),
                problem.g0.sub(&pert[2].bottom(&grid)),
            )
        };
        let next = solve_laplace(spec, &rhs, &b1, &b0, problem.robin_coefficient);
        if !next.is_finite() {
            return Err(PressureError::NonFinite);
        }
        let size = next.max_abs();
        let update = next.max_abs_diff(&q);
        let rel = if size > 0.0 { update / size } else { update };
        history.push(rel);
        q = next;
        let done = if data_zero { size <= cfg.tol } else { rel <= cfg.tol };
        if done {
            let residual = pressure_residual(spec, problem, &q);
            return Ok(PressureSolution {
                q,
                contraction: contraction_estimate(&history),
                history,
                residual,
            });
        }
    }
    Err(PressureError::NoConvergence {
        iterations: history.len(),
        update: *history.last().unwrap_or(&f64::NAN),
        ratio: contraction_estimate(&history),
    })
}

/// Subtracts the constant that makes the top trace mean zero.
pub fn normalize_surface_mean(grid: &Grid, q: &Volume) -> (Volume, f64) {
    let c = q.top(grid).mean();
    if c == 0.0 {
        return (q.clone(), 0.0);
    }
    (q.map(|x| x - c), c)
}
