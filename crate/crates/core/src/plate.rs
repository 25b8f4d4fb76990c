//! Nonlinear Koiter plate on the top wall.
//!
//! The elastic operator `L_K` is the `L²` gradient of the Koiter energy
//!
//! ```text
//! E_K = h/4 ∫ a^{αβστ} G_αβ G_στ + h³/48 ∫ a^{αβστ} R_αβ R_στ
//! a^{αβστ} = δ_αβ δ_στ 4λμ/(λ+2μ) + 4μ δ_ασ δ_βτ
//! ```
//!
//! with the metric change `G_αβ = ∂_α w ∂_β w` and either the plain
//! (`R = ∂²w`) or the normalised (`R = ∂²w / √(1 + |∇w|²)`) curvature change.
//! Both models are assembled weakly: the operator is the adjoint of the Fréchet
//! derivatives of `G` and `R` contracted with the stress, so that
//! `⟨L_K w, ξ⟩` is exactly the directional derivative of the discrete energy
//! whenever `ξ` lies inside the dealiased band.

use std::str::FromStr;

use num_complex::Complex64;

use crate::error::PlateError;
use crate::grid::Surface;
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureModel {
    NonNormalized,
    Normalized,
}

impl FromStr for CurvatureModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "non_normalized" => Ok(Self::NonNormalized),
            "normalized" => Ok(Self::Normalized),
            other => Err(format!("expected `non_normalized` or `normalized`, got `{other}`")),
        }
    }
}

impl CurvatureModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NonNormalized => "non_normalized",
            Self::Normalized => "normalized",
        }
    }
}

/// Which elastic law the plate obeys.
///
/// `Koiter` is `h w_tt + L_K w - ν Δ w_t = q`; `Biharmonic` is the linear
/// surrogate `w_tt + Δ² w - ν Δ w_t = q` used inside the construction scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateOperator {
    Koiter,
    Biharmonic,
}

impl FromStr for PlateOperator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "koiter" => Ok(Self::Koiter),
            "biharmonic" => Ok(Self::Biharmonic),
            other => Err(format!("expected `koiter` or `biharmonic`, got `{other}`")),
        }
    }
}

impl PlateOperator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Koiter => "koiter",
            Self::Biharmonic => "biharmonic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateParams {
    pub h: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub curvature_model: CurvatureModel,
    pub operator: PlateOperator,
}

impl Default for PlateParams {
    fn default() -> Self {
        Self {
            h: 0.5,
            lambda: 1.0,
            mu: 1.0,
            nu: 0.0,
            curvature_model: CurvatureModel::NonNormalized,
            operator: PlateOperator::Koiter,
        }
    }
}

impl PlateParams {
    pub fn validate(&self) -> Result<(), PlateError> {
        let bad = |what: &str, v: f64| PlateError::InvalidParams(format!("{what} = {v}"));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(bad("h must be > 0, got h", self.h));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(bad("lambda must be > 0, got lambda", self.lambda));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(bad("mu must be > 0, got mu", self.mu));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(bad("nu must be >= 0, got nu", self.nu));
        }
        Ok(())
    }

    /// `4λμ / (λ + 2μ)`
    pub fn lame_coupling(&self) -> f64 {
        4.0 * self.lambda * self.mu / (self.lambda + 2.0 * self.mu)
    }

    /// `a^{αβστ}` with indices in `{0, 1}`.
    pub fn elasticity(&self, a: usize, b: usize, s: usize, t: usize) -> f64 {
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        d(a, b) * d(s, t) * self.lame_coupling() + 4.0 * self.mu * d(a, s) * d(b, t)
    }

    /// Coefficient of `Δ²` in the linear bending operator.
    pub fn bending_stiffness(&self) -> f64 {
        match self.operator {
            PlateOperator::Koiter => self.h.powi(3) / 24.0 * (self.lame_coupling() + 4.0 * self.mu),
            PlateOperator::Biharmonic => 1.0,
        }
    }

    /// Coefficient of `w_tt`.
    pub fn mass(&self) -> f64 {
        match self.operator {
            PlateOperator::Koiter => self.h,
            PlateOperator::Biharmonic => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateState {
    pub w: Surface,
    pub w_t: Surface,
    pub t: f64,
}

impl PlateState {
    pub fn at_rest(spec: &Spectral) -> Self {
        let g = spec.grid();
        Self {
            w: Surface::zeros(g),
            w_t: Surface::zeros(g),
            t: 0.0,
        }
    }

    /// Componentwise average of two states (time midpoint).
    pub fn midpoint(a: &Self, b: &Self) -> Self {
        Self {
            w: Surface::lincomb(0.5, &a.w, 0.5, &b.w),
            w_t: Surface::lincomb(0.5, &a.w_t, 0.5, &b.w_t),
            t: 0.5 * (a.t + b.t),
        }
    }
}

/// Symmetric 2×2 tensor of surface fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2(pub [[Surface; 2]; 2]);

impl Tensor2 {
    pub fn get(&self, a: usize, b: usize) -> &Surface {
        &self.0[a][b]
    }

    /// `a^{αβστ} T_στ`, the stress associated with a strain-like tensor.
    pub fn contract_elasticity(&self, p: &PlateParams) -> Tensor2 {
        let tr = self.0[0][0].add(&self.0[1][1]);
        let c1 = p.lame_coupling();
        let m4 = 4.0 * p.mu;
        let s = |a: usize, b: usize| {
            let mut out = self.0[a][b].scaled(m4);
            if a == b {
                out.axpy(c1, &tr);
            }
            out
        };
        Tensor2([[s(0, 0), s(0, 1)], [s(1, 0), s(1, 1)]])
    }

    /// Full contraction `A : B` (pointwise).
    pub fn double_dot(&self, other: &Tensor2) -> Surface {
        let mut out = self.0[0][0].mul(&other.0[0][0]);
        for (a, b) in [(0, 1), (1, 0), (1, 1)] {
            out = out.add(&self.0[a][b].mul(&other.0[a][b]));
        }
        out
    }
}

fn first_derivs(spec: &Spectral, w: &Surface) -> [Surface; 2] {
    [spec.deriv(w, 1, 0), spec.deriv(w, 0, 1)]
}

fn second_derivs(spec: &Spectral, w: &Surface) -> Tensor2 {
    let d11 = spec.deriv(w, 2, 0);
    let d12 = spec.deriv(w, 1, 1);
    let d22 = spec.deriv(w, 0, 2);
    Tensor2([[d11, d12.clone()], [d12, d22]])
}

fn second_deriv_op(spec: &Spectral, f: &Surface, a: usize, b: usize) -> Surface {
    let mut o = [0u32; 2];
    o[a] += 1;
    o[b] += 1;
    spec.deriv(f, o[0], o[1])
}

fn first_deriv_op(spec: &Spectral, f: &Surface, a: usize) -> Surface {
    if a == 0 {
        spec.deriv(f, 1, 0)
    } else {
        spec.deriv(f, 0, 1)
    }
}

/// Change of the metric tensor `G_αβ = ∂_α w ∂_β w`, dealiased.
pub fn metric_change(spec: &Spectral, w: &Surface) -> Tensor2 {
    let dw = first_derivs(spec, w);
    let g = |a: usize, b: usize| spec.dealias(&dw[a].mul(&dw[b]));
    let g01 = g(0, 1);
    Tensor2([[g(0, 0), g01.clone()], [g01, g(1, 1)]])
}

/// `√(1 + |∇w|²)` evaluated pointwise.
fn area_factor(dw: &[Surface; 2]) -> Surface {
    Surface(
        dw[0]
            .0
            .iter()
            .zip(&dw[1].0)
            .map(|(a, b)| (1.0 + a * a + b * b).sqrt())
            .collect(),
    )
}

/// Change of curvature tensor for either model.
pub fn curvature_change(spec: &Spectral, w: &Surface, model: CurvatureModel) -> Tensor2 {
    let d2 = second_derivs(spec, w);
    match model {
        CurvatureModel::NonNormalized => d2,
        CurvatureModel::Normalized => {
            let inv_s = area_factor(&first_derivs(spec, w)).map(|s| 1.0 / s);
            let r = |a: usize, b: usize| spec.dealias(&d2.0[a][b].mul(&inv_s));
            let r01 = r(0, 1);
            Tensor2([[r(0, 0), r01.clone()], [r01, r(1, 1)]])
        }
    }
}

/// Membrane part `h/4 ∫ a G:G`.
pub fn membrane_energy(spec: &Spectral, w: &Surface, p: &PlateParams) -> f64 {
    let g = metric_change(spec, w);
    0.25 * p.h * g.contract_elasticity(p).double_dot(&g).mean()
}

/// Bending part `h³/48 ∫ a R:R`.
pub fn bending_energy(spec: &Spectral, w: &Surface, p: &PlateParams) -> f64 {
    let r = curvature_change(spec, w, p.curvature_model);
    p.h.powi(3) / 48.0 * r.contract_elasticity(p).double_dot(&r).mean()
}

/// Koiter energy. Under the biharmonic surrogate this is `½ ∫ |Δw|²`.
pub fn koiter_energy(spec: &Spectral, w: &Surface, p: &PlateParams) -> f64 {
    match p.operator {
        PlateOperator::Koiter => membrane_energy(spec, w, p) + bending_energy(spec, w, p),
        PlateOperator::Biharmonic => 0.5 * spec.laplacian(w).l2().powi(2),
    }
}

/// Membrane operator `L_m w = -h ∂_σ (a^{αβστ} G_αβ ∂_τ w)`.
pub fn membrane_operator(spec: &Spectral, w: &Surface, p: &PlateParams) -> Surface {
    let dw = first_derivs(spec, w);
    let q = metric_change(spec, w).contract_elasticity(p);
    let mut out = Surface::zeros(spec.grid());
    for s in 0..2 {
        let flux = q.0[s][0].mul(&dw[0]).add(&q.0[s][1].mul(&dw[1]));
        out.axpy(-p.h, &first_deriv_op(spec, &spec.dealias(&flux), s));
    }
    out
}

/// Per-mode symbol of the linear bending operator (`β` in `β ŵ`).
pub fn bending_symbol(spec: &Spectral, p: &PlateParams, mode: usize) -> f64 {
    let s11 = spec.derivative_symbol(mode, 2, 0).re;
    let s22 = spec.derivative_symbol(mode, 0, 2).re;
    let s12 = spec.derivative_symbol(mode, 1, 1).re;
    match p.operator {
        PlateOperator::Koiter => {
            p.h.powi(3) / 24.0
                * (p.lame_coupling() * (s11 + s22).powi(2) + 4.0 * p.mu * (s11 * s11 + 2.0 * s12 * s12 + s22 * s22))
        }
        PlateOperator::Biharmonic => (s11 + s22).powi(2),
    }
}

/// Linear bending operator (plain curvature): `h³ a^{αβστ}/24 ∂⁴_{αβστ} w`.
pub fn linear_bending_operator(spec: &Spectral, w: &Surface, p: &PlateParams) -> Surface {
    Surface(spec.apply_symbol(&w.0, |m| Complex64::new(bending_symbol(spec, p, m), 0.0)))
}

/// Bending operator for the configured curvature model.
pub fn bending_operator(spec: &Spectral, w: &Surface, p: &PlateParams) -> Surface {
    match p.curvature_model {
        CurvatureModel::NonNormalized => linear_bending_operator(spec, w, p),
        CurvatureModel::Normalized => {
            let dw = first_derivs(spec, w);
            let d2 = second_derivs(spec, w);
            let s = area_factor(&dw);
            let inv_s = s.map(|x| 1.0 / x);
            let inv_s3 = s.map(|x| 1.0 / (x * x * x));
            let r = curvature_change(spec, w, CurvatureModel::Normalized);
            let stress = r.contract_elasticity(p);
            let mut out = Surface::zeros(spec.grid());
            for a in 0..2 {
                for b in 0..2 {
                    let x = spec.dealias(&stress.0[a][b].mul(&inv_s));
                    out = out.add(&second_deriv_op(spec, &x, a, b));
                }
            }
            let coupling = stress.double_dot(&d2).mul(&inv_s3);
            for g in 0..2 {
                let y = spec.dealias(&coupling.mul(&dw[g]));
                out = out.add(&first_deriv_op(spec, &y, g));
            }
            out.scaled(p.h.powi(3) / 24.0)
        }
    }
}

/// Elastic operator of the configured plate law (`L_K`, or `Δ²` for the
/// biharmonic surrogate). The output has zero surface mean.
pub fn elastic_operator(spec: &Spectral, w: &Surface, p: &PlateParams) -> Surface {
    match p.operator {
        PlateOperator::Koiter => membrane_operator(spec, w, p).add(&bending_operator(spec, w, p)),
        PlateOperator::Biharmonic => linear_bending_operator(spec, w, p),
    }
}

/// Nonlinear remainder `L_K w - β w`, the part stepped at the midpoint.
fn nonlinear_remainder(spec: &Spectral, w: &Surface, p: &PlateParams) -> Option<Surface> {
    match (p.operator, p.curvature_model) {
        (PlateOperator::Biharmonic, _) => None,
        (PlateOperator::Koiter, CurvatureModel::NonNormalized) => Some(membrane_operator(spec, w, p)),
        (PlateOperator::Koiter, CurvatureModel::Normalized) => Some(
            membrane_operator(spec, w, p)
                .add(&bending_operator(spec, w, p))
                .sub(&linear_bending_operator(spec, w, p)),
        ),
    }
}

/// Discrete plate energy `m/2 ‖w_t‖² + E_K(w)`.
pub fn plate_energy(spec: &Spectral, s: &PlateState, p: &PlateParams) -> f64 {
    0.5 * p.mass() * s.w_t.l2().powi(2) + koiter_energy(spec, &s.w, p)
}

/// Relative tolerance on the surface mean of the plate forcing.
pub const FORCING_MEAN_TOL: f64 = 1e-10;

const MIDPOINT_TOL: f64 = 1e-14;
const MIDPOINT_MAX_SWEEPS: usize = 60;

/// One step of the plate equation.
///
/// Bending and damping are integrated with the trapezoidal rule mode by mode;
/// the nonlinear remainder is evaluated explicitly at the time midpoint
/// `(w⁰ + w¹)/2`, with the midpoint refined by fixed-point sweeps. `q` is the
/// forcing at the step midpoint and must have zero surface mean.
pub fn plate_step(
    spec: &Spectral,
    state: &PlateState,
    q: &Surface,
    p: &PlateParams,
    dt: f64,
) -> Result<PlateState, PlateError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PlateError::BadTimeStep(dt));
    }
    let mean = q.mean();
    if mean.abs() > FORCING_MEAN_TOL * q.max_abs() {
        return Err(PlateError::NonZeroMeanForcing { mean });
    }
    let m = spec.grid().plane();
    let mass = p.mass();
    let w0 = spec.forward(&state.w.0);
    let u0 = spec.forward(&state.w_t.0);
    let qh = spec.forward(&q.0);
    let beta: Vec<f64> = (0..m).map(|k| bending_symbol(spec, p, k)).collect();
    let gamma: Vec<f64> = (0..m)
        .map(|k| -p.nu * (spec.derivative_symbol(k, 2, 0) + spec.derivative_symbol(k, 0, 2)).re)
        .collect();

    let solve = |force: &[Complex64]| -> (Vec<Complex64>, Vec<Complex64>) {
        let mut w1 = vec![Complex64::new(0.0, 0.0); m];
        let mut u1 = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..m {
            let f = if k == 0 { Complex64::new(0.0, 0.0) } else { force[k] };
            let denom = mass + 0.5 * dt * gamma[k] + 0.25 * dt * dt * beta[k];
            let s = (u0[k] * (2.0 * mass) - w0[k] * (dt * beta[k]) + f * dt) / denom;
            u1[k] = s - u0[k];
            w1[k] = w0[k] + s * (0.5 * dt);
        }
        (w1, u1)
    };

    let (w1, u1) = match nonlinear_remainder(spec, &state.w, p) {
        None => solve(&qh),
        Some(_) => {
            let mut w_end = state.w.add(&state.w_t.scaled(dt));
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                let mid = Surface::lincomb(0.5, &state.w, 0.5, &w_end);
                let nl = nonlinear_remainder(spec, &mid, p).expect("nonlinear model");
                let nh = spec.forward(&nl.0);
                let force: Vec<Complex64> = qh.iter().zip(&nh).map(|(a, b)| a - b).collect();
                let (w1, u1) = solve(&force);
                let w_new = Surface(spec.inverse(&w1));
                let update = w_new.max_abs_diff(&w_end);
                let scale = w_new.max_abs().max(f64::MIN_POSITIVE);
                w_end = w_new;
                if update <= MIDPOINT_TOL * scale || update == 0.0 {
                    break (w1, u1);
                }
                if sweeps >= MIDPOINT_MAX_SWEEPS || !update.is_finite() {
                    return Err(PlateError::Midpoint {
                        iterations: sweeps,
                        update,
                    });
                }
            }
        }
    };
    Ok(PlateState {
        w: Surface(spec.inverse(&w1)),
        w_t: Surface(spec.inverse(&u1)),
        t: state.t + dt,
    })
}

/// Compares `⟨L_K w, ξ⟩` with the central difference
/// `(E_K(w + εξ) - E_K(w - εξ)) / 2ε` and returns the relative error.
pub fn energy_gradient_check(spec: &Spectral, w: &Surface, xi: &Surface, p: &PlateParams, eps: f64) -> f64 {
    let pairing = elastic_operator(spec, w, p).dot(xi);
    let plus = koiter_energy(spec, &Surface::lincomb(1.0, w, eps, xi), p);
    let minus = koiter_energy(spec, &Surface::lincomb(1.0, w, -eps, xi), p);
    let fd = (plus - minus) / (2.0 * eps);
    let scale = pairing.abs().max(fd.abs());
    if scale == 0.0 {
        0.0
    } else {
        (pairing - fd).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::spectral::TWO_PI;

    fn spec(n: usize) -> Spectral {
        Spectral::new(Grid::new(n, n, 9).unwrap())
    }

    fn params() -> PlateParams {
        PlateParams {
            h: 0.3,
            lambda: 1.5,
            mu: 0.7,
            ..PlateParams::default()
        }
    }

    #[test]
    fn zero_displacement() {
        let s = spec(16);
        let g = *s.grid();
        let w = Surface::zeros(&g);
        let p = params();
        assert_eq!(koiter_energy(&s, &w, &p), 0.0);
        assert_eq!(elastic_operator(&s, &w, &p).max_abs(), 0.0);
        for model in [CurvatureModel::NonNormalized, CurvatureModel::Normalized] {
            let r = curvature_change(&s, &w, model);
            assert_eq!(
                r.get(0, 0).max_abs() + r.get(0, 1).max_abs() + r.get(1, 1).max_abs(),
                0.0
            );
        }
    }

    #[test]
    fn metric_change_single_mode() {
        let s = spec(16);
        let g = *s.grid();
        let a = 0.2;
        let w = Surface::from_fn(&g, |x, _| a * (TWO_PI * x).cos());
        let gm = metric_change(&s, &w);
        let expect = Surface::from_fn(&g, |x, _| a * a * TWO_PI * TWO_PI * (TWO_PI * x).sin().powi(2));
        assert!(gm.get(0, 0).max_abs_diff(&expect) < 1e-12);
        assert!(gm.get(0, 1).max_abs() < 1e-13 && gm.get(1, 1).max_abs() < 1e-13);
        let g2 = metric_change(&s, &w.scaled(3.0));
        assert!(g2.get(0, 0).max_abs_diff(&gm.get(0, 0).scaled(9.0)) < 1e-11);
    }

    #[test]
    fn curvature_single_mode() {
        let s = spec(16);
        let g = *s.grid();
        let a = 0.01;
        let w = Surface::from_fn(&g, |x, _| a * (TWO_PI * x).cos());
        let r = curvature_change(&s, &w, CurvatureModel::NonNormalized);
        let expect = Surface::from_fn(&g, |x, _| -a * TWO_PI * TWO_PI * (TWO_PI * x).cos());
        assert!(r.get(0, 0).max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn mixed_tensor_route_matches_symbol_for_plain_curvature() {
        // Σ ∂_αβ (a^{αβστ} ∂_στ w) through the tensor path equals β ŵ
        let s = spec(16);
        let g = *s.grid();
        let p = params();
        let w = Surface::from_fn(&g, |x, y| {
            0.1 * (TWO_PI * (x + 2.0 * y)).sin() + 0.03 * (TWO_PI * 3.0 * x).cos() * (TWO_PI * y).sin()
        });
        let r = curvature_change(&s, &w, CurvatureModel::NonNormalized);
        let st = r.contract_elasticity(&p);
        let mut tensor = Surface::zeros(&g);
        for a in 0..2 {
            for b in 0..2 {
                tensor = tensor.add(&second_deriv_op(&s, st.get(a, b), a, b));
            }
        }
        let tensor = tensor.scaled(p.h.powi(3) / 24.0);
        let sym = linear_bending_operator(&s, &w, &p);
        assert!(tensor.max_abs_diff(&sym) < 1e-10 * sym.max_abs());
    }

    #[test]
    fn membrane_reduces_to_p_laplacian_form() {
        // L_m w = -h (c1 + 4μ) div(|∇w|² ∇w) for the isotropic tensor
        let s = spec(32);
        let g = *s.grid();
        let p = params();
        let w = Surface::from_fn(&g, |x, y| {
            0.1 * (TWO_PI * x).cos() * (TWO_PI * y).sin() + 0.05 * (TWO_PI * y).cos()
        });
        let dw = first_derivs(&s, &w);
        let n2 = dw[0].mul(&dw[0]).add(&dw[1].mul(&dw[1]));
        let div = s.deriv(&n2.mul(&dw[0]), 1, 0).add(&s.deriv(&n2.mul(&dw[1]), 0, 1));
        let expect = div.scaled(-p.h * (p.lame_coupling() + 4.0 * p.mu));
        let lm = membrane_operator(&s, &w, &p);
        assert!(lm.max_abs_diff(&expect) < 1e-10 * expect.max_abs());
    }

    #[test]
    fn operator_mean_is_zero() {
        let s = spec(16);
        let g = *s.grid();
        let mut p = params();
        let w = Surface::from_fn(&g, |x, y| {
            0.2 * (TWO_PI * x).sin() * (TWO_PI * y).cos() + 0.1 * (TWO_PI * 2.0 * y).sin()
        });
        for model in [CurvatureModel::NonNormalized, CurvatureModel::Normalized] {
            p.curvature_model = model;
            assert!(elastic_operator(&s, &w, &p).mean().abs() < 1e-14);
        }
    }

    #[test]
    fn plate_step_rejects_bad_input() {
        let s = spec(8);
        let g = *s.grid();
        let st = PlateState::at_rest(&s);
        let p = params();
        assert!(matches!(
            plate_step(&s, &st, &Surface::zeros(&g), &p, 0.0),
            Err(PlateError::BadTimeStep(_))
        ));
        assert!(matches!(
            plate_step(&s, &st, &Surface::constant(&g, 0.5), &p, 1e-3),
            Err(PlateError::NonZeroMeanForcing { .. })
        ));
    }

    #[test]
    fn rest_state_stays_at_rest() {
        let s = spec(8);
        let g = *s.grid();
        let st = PlateState::at_rest(&s);
        let next = plate_step(&s, &st, &Surface::zeros(&g), &params(), 1e-2).unwrap();
        assert_eq!(next.w.max_abs(), 0.0);
        assert_eq!(next.w_t.max_abs(), 0.0);
        assert!((next.t - 1e-2).abs() < 1e-16);
    }

    #[test]
    fn damped_energy_decreases() {
        let s = spec(16);
        let g = *s.grid();
        let p = PlateParams { nu: 0.1, ..params() };
        let mut st = PlateState {
            w: Surface::from_fn(&g, |x, y| 0.05 * (TWO_PI * x).cos() + 0.02 * (TWO_PI * (x + y)).sin()),
            w_t: Surface::from_fn(&g, |_, y| 0.1 * (TWO_PI * y).sin()),
            t: 0.0,
        };
        let zero = Surface::zeros(&g);
        let mut e = plate_energy(&s, &st, &p);
        for _ in 0..200 {
            st = plate_step(&s, &st, &zero, &p, 2e-3).unwrap();
            let e1 = plate_energy(&s, &st, &p);
            assert!(e1 <= e, "{e1} > {e}");
            e = e1;
        }
    }

    #[test]
    fn biharmonic_variant_is_linear() {
        let s = spec(16);
        let g = *s.grid();
        let p = PlateParams {
            operator: PlateOperator::Biharmonic,
            ..params()
        };
        let w = Surface::from_fn(&g, |x, _| (TWO_PI * x).cos());
        let lk = elastic_operator(&s, &w, &p);
        assert!(lk.max_abs_diff(&w.scaled(TWO_PI.powi(4))) < 1e-9);
    }
}
