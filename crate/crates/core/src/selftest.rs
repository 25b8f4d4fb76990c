//! Quick property checks on small grids, run by the `selftest` subcommand.

use std::path::Path;

use crate::coupling::{check_compatibility, run_simulation, Collect, CouplingConfig, Simulator, TimeConfig};
use crate::fluid::{divergence_cleanup, divergence_interior, impose_boundary_conditions, Projector};
use crate::geometry::{cofactor_error, inverse_identity_error, GeometryState};
use crate::grid::{d3, Grid, Surface, Volume};
use crate::io::{decode_snapshot, encode_snapshot, CsvObserver, Snapshot};
use crate::plate::{energy_gradient_check, linear_bending_operator, membrane_operator, CurvatureModel, PlateParams};
use crate::presets::{build_initial_data, Preset, PresetKind};
use crate::pressure::{laplacian, solve_robin_neumann, EllipticProblem, PressureConfig};
use crate::spectral::{Spectral, TWO_PI};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check {
        name,
        pass: value <= limit,
        detail: format!("{value:.3e} (limit {limit:.0e})"),
    }
}

fn smooth_surface(g: &Grid, a: f64) -> Surface {
    Surface::from_fn(g, |x, y| {
        a * ((TWO_PI * x).cos() + 0.5 * (TWO_PI * (x + 2.0 * y)).sin() - 0.3 * (2.0 * TWO_PI * y).cos())
    })
}

fn geometry(spec: &Spectral) -> Vec<Check> {
    let g = *spec.grid();
    let w = smooth_surface(&g, 0.02);
    let geom = GeometryState::build(spec, &w, &Surface::zeros(&g), 0.0, f64::INFINITY).expect("small amplitude");
    vec![
        check("geometry: E inverts the gradient", inverse_identity_error(&geom), 1e-12),
        check("geometry: F = J E", cofactor_error(&geom), 1e-12),
    ]
}

fn plate(spec: &Spectral) -> Vec<Check> {
    let g = *spec.grid();
    let w = smooth_surface(&g, 0.01);
    let xi = Surface::from_fn(&g, |x, y| 0.01 * ((TWO_PI * x).cos() - 0.7 * (TWO_PI * (x - y)).sin()));
    let mut out = Vec::new();
    for (model, limit, name) in [
        (
            CurvatureModel::NonNormalized,
            1e-6,
            "plate: gradient of Koiter energy (non-normalized)",
        ),
        (
            CurvatureModel::Normalized,
            1e-5,
            "plate: gradient of Koiter energy (normalized)",
        ),
    ] {
        let p = PlateParams {
            curvature_model: model,
            ..PlateParams::default()
        };
        out.push(check(name, energy_gradient_check(spec, &w, &xi, &p, 1e-4), limit));
    }
    let p = PlateParams::default();
    let c = Surface::from_fn(&g, |x, _| (TWO_PI * x).cos());
    let expect = c.scaled(p.bending_stiffness() * TWO_PI.powi(4));
    let lb = linear_bending_operator(spec, &c, &p);
    out.push(check(
        "plate: bending symbol",
        lb.max_abs_diff(&expect) / expect.max_abs(),
        1e-12,
    ));
    let lm = membrane_operator(spec, &w, &p);
    let lm2 = membrane_operator(spec, &w.scaled(2.0), &p);
    out.push(check(
        "plate: membrane homogeneity",
        lm2.max_abs_diff(&lm.scaled(8.0)) / lm2.max_abs(),
        1e-12,
    ));
    out
}

fn pressure(spec: &Spectral) -> Vec<Check> {
    let g = *spec.grid();
    let alpha = 2.0;
    let qs = Volume::from_fn(&g, |x, _, z| (TWO_PI * x).cos() * (TWO_PI * z).cosh());
    let dq = d3(&g, &qs);
    let mut p = EllipticProblem::identity(&g, alpha);
    p.s = laplacian(spec, &qs);
    p.g1 = dq.top(&g).add(&qs.top(&g).scaled(alpha));
    p.g0 = dq.bottom(&g);
    let err = match solve_robin_neumann(spec, &p, &PressureConfig::default(), None) {
        Ok(sol) => sol.q.max_abs_diff(&qs) / qs.max_abs(),
        Err(_) => f64::INFINITY,
    };
    vec![check("pressure: manufactured solution", err, 1e-10)]
}

fn cleanup(spec: &Spectral) -> Vec<Check> {
    let g = *spec.grid();
    let w = smooth_surface(&g, 0.01);
    let geom = GeometryState::build(spec, &w, &Surface::zeros(&g), 0.0, f64::INFINITY).expect("small amplitude");
    // wall fluxes must balance before the divergence can be removed
    let mut v = [
        Volume::from_fn(&g, |x, y, z| (TWO_PI * x).sin() * z + (TWO_PI * y).cos()),
        Volume::from_fn(&g, |x, _, z| (TWO_PI * x).cos() * z * z),
        Volume::from_fn(&g, |_, y, z| (TWO_PI * y).sin() * z * (1.0 - z)),
    ];
    impose_boundary_conditions(&g, &mut v, &geom, &Surface::zeros(&g));
    let projector = Projector::new(spec);
    let (out, before, _) = divergence_cleanup(spec, &projector, &v, &geom);
    vec![check(
        "fluid: divergence cleanup on curved geometry",
        divergence_interior(spec, &out, &geom) / before,
        1e-9,
    )]
}

fn compatibility(spec: &Spectral) -> Vec<Check> {
    let worst = PresetKind::ALL
        .iter()
        .map(|&kind| {
            let d = build_initial_data(
                spec,
                &Preset {
                    kind,
                    flow_amplitude: 0.1,
                    ..Preset::default()
                },
            );
            let r = check_compatibility(spec, &d);
            r.items.iter().fold(0.0_f64, |m, i| m.max(i.residual))
        })
        .fold(0.0_f64, f64::max);
    vec![check(
        "coupling: every preset passes the compatibility gate",
        worst,
        1e-10,
    )]
}

fn coupled(spec: &Spectral, out_dir: Option<&Path>) -> Vec<Check> {
    let data = build_initial_data(
        spec,
        &Preset {
            kind: PresetKind::SingleModePlate,
            ..Preset::default()
        },
    );
    let sim = Simulator::new(spec.clone(), PlateParams::default(), CouplingConfig::default());
    let time = TimeConfig {
        dt: 1e-3,
        t_final: 0.02,
        output_every: 5,
    };
    let mut obs = Collect::default();
    let summary = run_simulation(&sim, &data, &time, None, &mut obs);
    if let Some(dir) = out_dir {
        // a persisted copy of the same run for offline inspection
        if let Ok(mut csv) = CsvObserver::new(dir, *spec.grid(), true, false) {
            let _ = run_simulation(&sim, &data, &time, None, &mut csv);
        }
    }
    let mut checks = vec![Check {
        name: "coupling: short single-mode run completes",
        pass: summary.completed(),
        detail: match &summary.failure {
            None => format!("{} steps", summary.steps_completed),
            Some((t, e)) => format!("stopped at t = {t}: {e}"),
        },
    }];
    let Some(state) = summary.final_state.as_ref().filter(|_| summary.completed()) else {
        return checks;
    };
    let iters = obs.picard.iter().map(|l| l.iterations).max().unwrap_or(0);
    checks.push(check("coupling: Picard iterations per step", iters as f64, 15.0));
    let residual = obs
        .records
        .iter()
        .map(|r| r.report.interface_residual)
        .fold(0.0_f64, f64::max);
    checks.push(check("coupling: interface residual", residual, 1e-8));
    checks.push(check(
        "coupling: mean plate velocity",
        state.plate.w_t.mean().abs(),
        1e-13,
    ));

    let mut again = Collect::default();
    let _ = run_simulation(&sim, &data, &time, None, &mut again);
    let same = again.records == obs.records;
    checks.push(Check {
        name: "coupling: rerun is bit-identical",
        pass: same,
        detail: if same {
            "identical".into()
        } else {
            "records differ".into()
        },
    });

    let bytes = encode_snapshot(&Snapshot::from_state(*spec.grid(), state));
    let round = decode_snapshot(&bytes).map(|s| encode_snapshot(&s));
    let ok = round.as_ref().is_ok_and(|b| *b == bytes);
    checks.push(Check {
        name: "io: snapshot round trip",
        pass: ok,
        detail: format!("{} bytes", bytes.len()),
    });
    checks
}

/// Runs every check; the short coupled run also writes CSV output to
/// `out_dir` when one is given.
pub fn run_selftest(out_dir: Option<&Path>) -> Vec<Check> {
    let s16 = Spectral::new(Grid::new(16, 16, 17).expect("valid grid"));
    let s8 = Spectral::new(Grid::new(8, 8, 9).expect("valid grid"));
    let mut out = geometry(&s16);
    out.extend(plate(&s16));
    out.extend(pressure(&s16));
    out.extend(cleanup(&s16));
    out.extend(compatibility(&s16));
    out.extend(coupled(&s8, out_dir));
    out
}
