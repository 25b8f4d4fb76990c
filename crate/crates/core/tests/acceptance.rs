//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kch::coupling::{check_compatibility, nu_sweep, run_simulation, Collect, CouplingConfig, Simulator, TimeConfig};
use kch::diagnostics::{data_size, NormReport};
use kch::fluid::{ale_vorticity, vorticity_transport_step, zero_vector, VorticityState};
use kch::geometry::{
    cofactor_error, harmonic_extension, inverse_identity_error, laplacian_residual, piola_residual, GeometryState,
};
use kch::grid::{d3, Grid, Surface, Volume};
use kch::plate::{
    elastic_operator, energy_gradient_check, linear_bending_operator, membrane_operator, plate_energy, plate_step,
    CurvatureModel, PlateParams, PlateState,
};
use kch::presets::{build_initial_data, potential_velocity, InitialData, Preset, PresetKind};
use kch::pressure::{laplacian, pressure_residual, solve_robin_neumann, EllipticProblem, PressureConfig};
use kch::spectral::{Spectral, TWO_PI};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn spec(n: usize, n3: usize) -> Spectral {
    Spectral::new(Grid::new(n, n, n3).unwrap())
}

/// Zero-mean real field with modes `|k1|, |k2| <= kmax`, amplitude decaying
/// like `1 / (1 + |k|^2)`, scaled to max norm `amp`.
fn random_field(g: &Grid, rng: &mut ChaCha8Rng, kmax: i64, amp: f64) -> Surface {
    let mut f = Surface::zeros(g);
    for k1 in -kmax..=kmax {
        for k2 in 0..=kmax {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let decay = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f = f.add(&Surface::from_fn(g, |x, y| {
                let ph = TWO_PI * (k1 as f64 * x + k2 as f64 * y);
                decay * (a * ph.cos() + b * ph.sin())
            }));
        }
    }
    let m = f.max_abs();
    f.scaled(amp / m)
}

fn within(ratio: f64, target: f64, tol: f64) -> bool {
    (ratio - target).abs() <= tol * target
}

fn c1_geometry_exactness() -> Outcome {
    let s = spec(32, 33);
    let g = *s.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_inv = 0.0_f64;
    let mut worst_cof = 0.0_f64;
    let start = Instant::now();
    for _ in 0..5 {
        let w = random_field(&g, &mut rng, 1, 0.1);
        let geom = GeometryState::build(&s, &w, &Surface::zeros(&g), 0.0, f64::INFINITY).unwrap();
        worst_inv = worst_inv.max(inverse_identity_error(&geom));
        worst_cof = worst_cof.max(cofactor_error(&geom));
    }
    let t = start.elapsed();
    outcome(
        worst_inv <= 1e-12 && worst_cof <= 1e-12 && t < Duration::from_secs(1),
        format!(
            "max|∇η E - I| = {worst_inv:.2e}, max|F - J E| = {worst_cof:.2e} (<= 1e-12), 5 fields in {t:.2?} (< 1 s)"
        ),
    )
}

fn c2_harmonicity_and_piola() -> Outcome {
    let start = Instant::now();
    let residuals = |n3: usize| {
        let s = spec(16, n3);
        let g = *s.grid();
        let w = Surface::from_fn(&g, |x, y| 0.05 * (TWO_PI * x).cos() + 0.03 * (TWO_PI * (x + y)).sin());
        let psi = harmonic_extension(&s, &w).unwrap();
        let geom = GeometryState::build(&s, &w, &Surface::zeros(&g), 0.0, f64::INFINITY).unwrap();
        (laplacian_residual(&s, &psi), piola_residual(&s, &geom.f))
    };
    let (l33, p33) = residuals(33);
    let (l65, p65) = residuals(65);
    let t = start.elapsed();
    let lap_ratio = l33 / l65;
    let lap_ok = within(lap_ratio, 4.0, 0.25);
    // the third column is an exact discrete identity here; both vanish
    let piola_ok = (p33[2] == 0.0 && p65[2] == 0.0) || within(p33[2] / p65[2], 4.0, 0.25);
    outcome(
        lap_ok && piola_ok && t < Duration::from_secs(5),
        format!(
            "Laplacian residual {l33:.3e} -> {l65:.3e} (ratio {lap_ratio:.3}, want 4 ± 25%); \
             Piola column 3 {:.1e} -> {:.1e} (columns 1,2 at N3=65: {:.1e}, {:.1e}); {t:.2?} (< 5 s)",
            p33[2], p65[2], p65[0], p65[1]
        ),
    )
}

fn c3_koiter_gradient() -> Outcome {
    let s = spec(16, 9);
    let g = *s.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut worst = [0.0_f64; 2];
    for _ in 0..10 {
        let w = random_field(&g, &mut rng, 3, 0.01);
        let xi = random_field(&g, &mut rng, 3, 0.01);
        for (i, model) in [CurvatureModel::NonNormalized, CurvatureModel::Normalized]
            .into_iter()
            .enumerate()
        {
            let p = PlateParams {
                curvature_model: model,
                ..PlateParams::default()
            };
            worst[i] = worst[i].max(energy_gradient_check(&s, &w, &xi, &p, 1e-3));
        }
    }
    let t = start.elapsed();
    outcome(
        worst[0] <= 1e-6 && worst[1] <= 1e-5 && t < Duration::from_secs(10),
        format!(
            "max relative error non-normalized {:.2e} (<= 1e-6), normalized {:.2e} (<= 1e-5), {t:.2?} (< 10 s)",
            worst[0], worst[1]
        ),
    )
}

fn c4_bending_symbol() -> Outcome {
    let s = spec(16, 9);
    let g = *s.grid();
    let p = PlateParams {
        h: 0.3,
        lambda: 2.0,
        mu: 0.7,
        ..PlateParams::default()
    };
    let c = Surface::from_fn(&g, |x, _| (TWO_PI * x).cos());
    let coeff = p.h.powi(3) / 24.0 * (4.0 * p.lambda * p.mu / (p.lambda + 2.0 * p.mu) + 4.0 * p.mu) * TWO_PI.powi(4);
    let lb = linear_bending_operator(&s, &c, &p);
    let sym_err = lb.max_abs_diff(&c.scaled(coeff)) / coeff;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = random_field(&g, &mut rng, 4, 0.05);
    let base = membrane_operator(&s, &w, &p);
    let mut hom_err = 0.0_f64;
    for alpha in [0.5, 2.0, -3.0] {
        let lm = membrane_operator(&s, &w.scaled(alpha), &p);
        let expect = base.scaled(alpha.powi(3));
        hom_err = hom_err.max(lm.max_abs_diff(&expect) / expect.max_abs());
    }
    outcome(
        sym_err <= 1e-12 && hom_err <= 1e-12,
        format!("bending symbol relative error {sym_err:.2e}, membrane homogeneity {hom_err:.2e} (both <= 1e-12)"),
    )
}

fn plate_run(s: &Spectral, p: &PlateParams, dt: f64, steps: usize) -> (Vec<f64>, f64) {
    let g = *s.grid();
    let mut st = PlateState {
        w: Surface::from_fn(&g, |x, y| 0.05 * (TWO_PI * x).cos() + 0.02 * (TWO_PI * (x + y)).sin()),
        w_t: Surface::from_fn(&g, |_, y| 0.1 * (TWO_PI * y).cos()),
        t: 0.0,
    };
    let zero = Surface::zeros(&g);
    let mut energies = vec![plate_energy(s, &st, p)];
    let mut mean = 0.0_f64;
    for _ in 0..steps {
        st = plate_step(s, &st, &zero, p, dt).unwrap();
        energies.push(plate_energy(s, &st, p));
        mean = mean.max(st.w_t.mean().abs());
    }
    (energies, mean)
}

fn c5_plate_energy() -> Outcome {
    let s = spec(16, 9);
    let p = PlateParams::default();
    let drift = |dt: f64| {
        let (e, mean) = plate_run(&s, &p, dt, 1000);
        (e.iter().map(|x| (x - e[0]).abs()).fold(0.0, f64::max), mean)
    };
    let (d1, m1) = drift(2e-3);
    let (d2, m2) = drift(1e-3);
    let ratio = d1 / d2;
    let damped = PlateParams { nu: 0.1, ..p };
    let (e, m3) = plate_run(&s, &damped, 1e-3, 1000);
    let worst_rise = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let monotone = worst_rise <= 0.0;
    let mean = m1.max(m2).max(m3);
    outcome(
        within(ratio, 4.0, 0.3) && monotone && mean <= 1e-13,
        format!(
            "drift {d1:.3e} -> {d2:.3e} under dt-halving (ratio {ratio:.3}, want 4 ± 30%); \
             damped largest step change {worst_rise:.2e} (<= 0); max|mean w_t| {mean:.1e} (<= 1e-13)"
        ),
    )
}

fn smooth_problem(g: &Grid, dev: f64) -> EllipticProblem {
    let one = Volume::constant(g, 1.0);
    let z = Volume::zeros(g);
    let pert = |f: &dyn Fn(f64, f64, f64) -> f64| Volume::from_fn(g, |x, y, zz| dev * f(x, y, zz));
    let b11 = pert(&|x, _, z| (TWO_PI * x).cos() * z);
    let b13 = pert(&|_, y, z| (TWO_PI * y).sin() * z * z);
    let b22 = pert(&|x, y, _| 0.5 * (TWO_PI * (x - y)).sin());
    let d = [
        [one.add(&b11), z.clone(), b13.clone()],
        [z.clone(), one.add(&b22), z.clone()],
        [b13, z.clone(), one],
    ];
    let s = Volume::from_fn(g, |x, y, zz| (TWO_PI * x).sin() * (1.0 + zz) + (TWO_PI * y).cos());
    let g1 = Surface::from_fn(g, |x, y| (TWO_PI * (x + y)).cos());
    let g0 = Surface::from_fn(g, |x, _| 0.5 * (TWO_PI * x).sin());
    EllipticProblem::new(d, [z.clone(), z.clone(), z], s, g1, g0, 2.0)
}

fn c6_pressure() -> Outcome {
    let alpha = 2.0;
    let cfg = PressureConfig::default();
    // discrete manufactured solution with the identity coefficient
    let s = spec(16, 33);
    let g = *s.grid();
    let qs = Volume::from_fn(&g, |x, y, z| {
        (TWO_PI * x).cos() * (TWO_PI * z).cosh() + (TWO_PI * y).sin() * z * z
    });
    let dq = d3(&g, &qs);
    let mut p = EllipticProblem::identity(&g, alpha);
    p.s = laplacian(&s, &qs);
    p.g1 = dq.top(&g).add(&qs.top(&g).scaled(alpha));
    p.g0 = dq.bottom(&g);
    let sol = solve_robin_neumann(&s, &p, &cfg, None).unwrap();
    let exact_err = sol.q.max_abs_diff(&qs) / qs.max_abs();

    // perturbed coefficient
    let pp = smooth_problem(&g, 0.1);
    let dev = pp.deviation;
    let psol = solve_robin_neumann(&s, &pp, &cfg, None).unwrap();
    let res = pressure_residual(&s, &pp, &psol.q);

    // continuum solution and exact boundary data
    let err = |n3: usize| {
        let s = spec(16, n3);
        let g = *s.grid();
        let k = TWO_PI;
        let q = Volume::from_fn(&g, |x, _, z| (k * x).cos() * (k * z).cosh());
        let mut p = EllipticProblem::identity(&g, alpha);
        p.g1 = Surface::from_fn(&g, |x, _| (k * x).cos() * (k * k.sinh() + alpha * k.cosh()));
        let sol = solve_robin_neumann(&s, &p, &cfg, None).unwrap();
        sol.q.max_abs_diff(&q) / q.max_abs()
    };
    let (e17, e33, e65) = (err(17), err(33), err(65));
    let order = e33 / e65;
    outcome(
        exact_err <= 1e-10 && psol.contraction <= 0.5 && res <= 1e-9 && within(order, 4.0, 0.25),
        format!(
            "d = I error {exact_err:.2e} (<= 1e-10); |d - I| = {dev:.2}: update ratio {:.3} (<= 0.5), \
             residual {res:.2e} (<= 1e-9), {} iterations; vertical errors {e17:.2e}, {e33:.2e}, {e65:.2e} \
             (ratio {:.3}, {order:.3}; want 4 ± 25%)",
            psol.contraction,
            psol.history.len(),
            e17 / e33
        ),
    )
}

fn rotational_data(s: &Spectral) -> InitialData {
    build_initial_data(
        s,
        &Preset {
            kind: PresetKind::RotationalFlow,
            amplitude: 1e-3,
            flow_amplitude: 0.2,
            ..Preset::default()
        },
    )
}

fn vorticity_mismatch(s: &Spectral, dt: f64, t_final: f64) -> f64 {
    let data = rotational_data(s);
    let sim = Simulator::new(s.clone(), PlateParams::default(), CouplingConfig::default());
    let mut state = sim.initialize(&data).unwrap();
    let mut vort = VorticityState::new(s, &state.fluid.v, &state.geom);
    let steps = (t_final / dt).round() as usize;
    for _ in 0..steps {
        let (next, _) = sim.step(&state, dt).unwrap();
        vort = vorticity_transport_step(s, &vort, &state.fluid.v, &state.geom, dt);
        state = next;
    }
    vort.zeta = ale_vorticity(s, &state.fluid.v, &state.geom);
    vort.mismatch(s.grid())
}

fn c7_vorticity() -> Outcome {
    let s = spec(32, 33);
    let r1 = vorticity_mismatch(&s, 5e-4, 0.05);
    let r2 = vorticity_mismatch(&s, 2.5e-4, 0.05);
    outcome(
        r1 <= 0.05 && r2 < r1,
        format!("|ζ - θ| / |ζ| at T = 0.05: {r1:.3e} (dt 5e-4, <= 0.05), {r2:.3e} (dt 2.5e-4, must decrease)"),
    )
}

fn single_mode(s: &Spectral) -> InitialData {
    build_initial_data(
        s,
        &Preset {
            kind: PresetKind::SingleModePlate,
            amplitude: 1e-3,
            ..Preset::default()
        },
    )
}

const STABILITY_TIME: TimeConfig = TimeConfig {
    dt: 1e-3,
    t_final: 0.1,
    output_every: 1,
};

fn c8_coupled_stability() -> Outcome {
    let s = spec(16, 17);
    let start = Instant::now();
    let sim = Simulator::new(s.clone(), PlateParams::default(), CouplingConfig::default());
    let mut obs = Collect::default();
    let summary = run_simulation(&sim, &single_mode(&s), &STABILITY_TIME, None, &mut obs);
    let t = start.elapsed();
    if let Some((t, e)) = summary.failure {
        return outcome(false, format!("run stopped at t = {t}: {e}"));
    }
    let first = obs.records[0].report;
    let m = data_size(&first);
    let mut worst = ("", 0.0_f64);
    let skip = ["interface_residual", "piola_residual"];
    for (i, name) in NormReport::FIELDS.iter().enumerate() {
        if skip.contains(name) {
            continue;
        }
        let base = first.values()[i].max(m);
        for r in &obs.records {
            let ratio = r.report.values()[i] / base;
            if ratio > worst.1 {
                worst = (name, ratio);
            }
        }
    }
    let iters = obs.picard.iter().map(|l| l.iterations).max().unwrap_or(0);
    let residual = obs
        .records
        .iter()
        .map(|r| r.report.interface_residual)
        .fold(0.0, f64::max);
    let steps = obs.picard.len();
    outcome(
        steps == 100 && worst.1 <= 2.0 && iters <= 15 && residual <= 1e-8 && t < Duration::from_secs(300),
        format!(
            "{steps} steps; largest proxy/baseline {:.4} ({}) (<= 2); max Picard iterations {iters} (<= 15); \
             interface residual {residual:.1e} (<= 1e-8); {t:.1?} (< 5 min)",
            worst.1, worst.0
        ),
    )
}

fn c9_nu_uniformity() -> Outcome {
    let s = spec(16, 17);
    let start = Instant::now();
    let table = nu_sweep(
        &s,
        &PlateParams::default(),
        &CouplingConfig::default(),
        &single_mode(&s),
        &STABILITY_TIME,
        &[1e-2, 1e-3, 1e-4, 0.0],
        4,
    );
    let t = start.elapsed();
    let failed: Vec<String> = table
        .rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|(t, e)| format!("nu = {}: t = {t}: {e}", r.nu)))
        .collect();
    let (sv, sw) = (table.spread("v_H3.5"), table.spread("w_H5"));
    outcome(
        failed.is_empty() && sv <= 1.1 && sw <= 1.1 && t < Duration::from_secs(1200),
        format!(
            "spread of max v_H3.5 {sv:.5}, of max w_H5 {sw:.5} (<= 1.1); {t:.1?} (< 20 min){}",
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failed.join("; "))
            }
        ),
    )
}

fn c10_curvature_models() -> Outcome {
    let s = spec(16, 9);
    let g = *s.grid();
    let shape = Surface::from_fn(&g, |x, y| (TWO_PI * x).cos() + 0.5 * (TWO_PI * (x + y)).sin());
    let rel = |a: f64| {
        let w = shape.scaled(a);
        let nn = elastic_operator(&s, &w, &PlateParams::default());
        let nz = elastic_operator(
            &s,
            &w,
            &PlateParams {
                curvature_model: CurvatureModel::Normalized,
                ..PlateParams::default()
            },
        );
        nz.sub(&nn).l2() / nn.l2()
    };
    let r = [rel(0.04), rel(0.02), rel(0.01)];
    let (q1, q2) = (r[0] / r[1], r[1] / r[2]);
    outcome(
        within(q1, 4.0, 0.3) && within(q2, 4.0, 0.3),
        format!(
            "relative model difference {:.3e}, {:.3e}, {:.3e}; ratios {q1:.3}, {q2:.3} (want 4 ± 30%)",
            r[0], r[1], r[2]
        ),
    )
}

fn c11_compatibility_gate() -> Outcome {
    let s = spec(16, 17);
    let g = *s.grid();
    let mut notes = Vec::new();
    let mut ok = true;

    for kind in PresetKind::ALL {
        let d = build_initial_data(
            &s,
            &Preset {
                kind,
                flow_amplitude: 0.2,
                seed: 5,
                ..Preset::default()
            },
        );
        if !check_compatibility(&s, &d).passed() {
            ok = false;
            notes.push(format!("preset {} rejected", kind.as_str()));
        }
    }

    let rest = InitialData {
        plate: PlateState::at_rest(&s),
        v: zero_vector(&g),
    };
    let cos_x = Surface::from_fn(&g, |x, _| (TWO_PI * x).cos());
    let mut cases: Vec<(usize, InitialData)> = Vec::new();

    let mut d = rest.clone();
    d.v[0][g.plane() * 3 + 5] = f64::NAN;
    cases.push((1, d));

    let mut d = rest.clone();
    d.plate.w = cos_x.scaled(1e-3);
    cases.push((2, d));

    // a net inflow through the plate; necessarily also divergent
    let mut d = rest.clone();
    d.plate.w_t = Surface::from_fn(&g, |_, _| 1e-3);
    d.v = potential_velocity(&s, &d.plate.w_t);
    cases.push((3, d));

    let mut d = rest.clone();
    d.v[0] = Volume::from_fn(&g, |x, _, _| 0.1 * (TWO_PI * x).sin());
    cases.push((4, d));

    let mut d = rest.clone();
    d.v[0] = Volume::from_fn(&g, |x, _, _| 0.1 * (TWO_PI * x).sin() / TWO_PI);
    d.v[2] = Volume::from_fn(&g, |x, _, z| 0.1 * (TWO_PI * x).cos() * (1.0 - z));
    cases.push((5, d));

    let mut d = rest.clone();
    d.plate.w_t = cos_x.clone();
    cases.push((6, d));

    for (item, data) in &cases {
        let r = check_compatibility(&s, data);
        let target = r.item(*item);
        let others: Vec<usize> = r.failures().iter().map(|i| i.index).filter(|i| i != item).collect();
        if target.pass {
            ok = false;
        }
        notes.push(format!(
            "item {item} \"{}\" residual {:.2e}{}",
            target.name,
            target.residual,
            if others.is_empty() {
                String::new()
            } else {
                format!(" (also {others:?})")
            }
        ));
    }
    // the documented example: residual exactly 1 in the sup norm
    let six = check_compatibility(&s, &cases[5].1).item(6).residual;
    if (six - 1.0).abs() > 1e-14 {
        ok = false;
    }
    let only = [2, 4, 5, 6]
        .iter()
        .all(|&i| check_compatibility(&s, &cases[i - 1].1).failures().len() == 1);
    outcome(ok && only, format!("all presets pass; {}", notes.join("; ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("geometry exactness", c1_geometry_exactness),
        ("harmonicity and Piola", c2_harmonicity_and_piola),
        ("Koiter gradient structure", c3_koiter_gradient),
        ("bending symbol", c4_bending_symbol),
        ("plate energy behaviour", c5_plate_energy),
        ("pressure solver", c6_pressure),
        ("vorticity equivalence", c7_vorticity),
        ("coupled stability", c8_coupled_stability),
        ("damping uniformity", c9_nu_uniformity),
        ("curvature-model consistency", c10_curvature_models),
        ("compatibility gate", c11_compatibility_gate),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !out.pass {
            failed += 1;
        }
        println!(
            "{} criterion {n:>2} ({name}): {} [{:.1?}]",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
