use proptest::prelude::*;

use kch::config::{parse_config_str, RunConfig};
use kch::diagnostics::{sobolev_surface, sobolev_volume};
use kch::geometry::{cofactor_error, inverse_identity_error, GeometryState};
use kch::grid::{Grid, Surface, Volume};
use kch::io::{decode_snapshot, encode_snapshot, Snapshot};
use kch::plate::CurvatureModel;
use kch::presets::{Preset, PresetKind};
use kch::spectral::{Spectral, TWO_PI};

fn spec() -> Spectral {
    Spectral::new(Grid::new(8, 8, 9).unwrap())
}

fn surface(g: &Grid, c: &[f64]) -> Surface {
    Surface::from_fn(g, |x, y| {
        c[0] * (TWO_PI * x).cos()
            + c[1] * (TWO_PI * y).sin()
            + c[2] * (TWO_PI * (x + y)).cos()
            + c[3] * (2.0 * TWO_PI * (x - y)).sin()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn surface_norm_is_a_norm(a in coeffs(), b in coeffs(), k in -3.0..3.0f64, s in 0.0..5.0f64) {
        let sp = spec();
        let g = *sp.grid();
        let (f, h) = (surface(&g, &a), surface(&g, &b));
        let nf = sobolev_surface(&sp, &f, s);
        prop_assert!((sobolev_surface(&sp, &f.scaled(k), s) - k.abs() * nf).abs() <= 1e-12 * (1.0 + nf));
        prop_assert!(sobolev_surface(&sp, &f.add(&h), s) <= nf + sobolev_surface(&sp, &h, s) + 1e-12);
        prop_assert!(sobolev_surface(&sp, &f, s) <= sobolev_surface(&sp, &f, s + 0.5) + 1e-12);
    }

    #[test]
    fn volume_norm_is_monotone_in_s(a in coeffs(), s in 0.0..3.0f64) {
        let sp = spec();
        let g = *sp.grid();
        let f = Volume::from_fn(&g, |x, y, z| {
            a[0] * (TWO_PI * x).cos() * z + a[1] * (TWO_PI * y).sin() * z * z + a[2] * z + a[3]
        });
        let lo = sobolev_volume(&sp, &f, s, 2.min(s.floor() as usize));
        let hi = sobolev_volume(&sp, &f, s + 0.5, 2.min((s + 0.5).floor() as usize));
        prop_assert!(lo <= hi + 1e-12);
    }

    #[test]
    fn spectral_round_trip(vals in prop::collection::vec(-10.0..10.0f64, 64)) {
        let sp = spec();
        let back = sp.inverse(&sp.forward(&vals));
        for (x, y) in vals.iter().zip(&back) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn geometry_identities_for_small_plates(a in coeffs()) {
        let sp = spec();
        let g = *sp.grid();
        let w = surface(&g, &a).scaled(0.02);
        let geom = GeometryState::build(&sp, &w, &Surface::zeros(&g), 0.0, f64::INFINITY).unwrap();
        prop_assert!(inverse_identity_error(&geom) <= 1e-12);
        prop_assert!(cofactor_error(&geom) <= 1e-12);
    }

    #[test]
    fn snapshot_round_trip(t in 0.0..10.0f64, a in coeffs()) {
        let g = Grid::new(8, 8, 9).unwrap();
        let w = surface(&g, &a);
        let v = [
            Volume::from_fn(&g, |x, _, z| a[0] * x * z),
            Volume::from_fn(&g, |_, y, _| a[1] * y),
            Volume::from_fn(&g, |x, y, z| a[2] * (x + y + z)),
        ];
        let snap = Snapshot { grid: g, t, w: w.clone(), w_t: w.scaled(a[3]), v, q: Volume::x3(&g) };
        let back = decode_snapshot(&encode_snapshot(&snap)).unwrap();
        prop_assert_eq!(back, snap);
    }

    #[test]
    fn config_survives_round_trip(
        h in 0.01..2.0f64,
        nu in 0.0..1.0f64,
        dt in 1e-5..1e-2f64,
        seed in any::<u64>(),
        normalized in any::<bool>(),
        kind in 0usize..5,
    ) {
        let mut cfg = RunConfig::default();
        cfg.plate.h = h;
        cfg.plate.nu = nu;
        cfg.time.dt = dt;
        if normalized {
            cfg.plate.curvature_model = CurvatureModel::Normalized;
        }
        cfg.initial = kch::config::InitialSource::Preset(Preset {
            kind: PresetKind::ALL[kind],
            seed,
            ..Preset::default()
        });
        let back = parse_config_str(&cfg.to_ini()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
