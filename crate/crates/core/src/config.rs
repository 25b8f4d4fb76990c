//! Run configuration: an INI-style file of `key = value` lines grouped under
//! `[section]` headers.
//!
//! ```text
//! file    := { blank | comment | header | entry }
//! comment := ('#' | ';') text
//! header  := '[' name ']'
//! entry   := key '=' value        (value may carry a trailing '#' comment)
//! ```
//!
//! Unknown sections and keys are rejected with the line number and, when a
//! known key is close, a suggestion. Missing keys keep their defaults.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::coupling::{CouplingConfig, PicardConfig, TimeConfig};
use crate::diagnostics::DEFAULT_C0;
use crate::error::ConfigError;
use crate::fluid::FluidConfig;
use crate::geometry::DEFAULT_C_MIN;
use crate::grid::Grid;
use crate::plate::{CurvatureModel, PlateOperator, PlateParams};
use crate::presets::{Preset, PresetKind};
use crate::pressure::PressureConfig;

/// Where the initial data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSource {
    Preset(Preset),
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub csv: bool,
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub pressure_tol: f64,
    pub pressure_max_iter: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub relaxation: f64,
    pub cfl_max: f64,
    pub divergence_cleanup: bool,
    pub epsilon_smallness: f64,
    pub c_min: f64,
    pub c0: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = PressureConfig::default();
        let pc = PicardConfig::default();
        let f = FluidConfig::default();
        let c = CouplingConfig::default();
        Self {
            pressure_tol: p.tol,
            pressure_max_iter: p.max_iter,
            picard_tol: pc.tol,
            picard_max_iter: pc.max_iter,
            relaxation: pc.relaxation,
            cfl_max: f.cfl_max,
            divergence_cleanup: f.divergence_cleanup,
            epsilon_smallness: c.epsilon,
            c_min: DEFAULT_C_MIN,
            c0: DEFAULT_C0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub plate: PlateParams,
    pub time: TimeConfig,
    pub solver: SolverConfig,
    pub initial: InitialSource,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: Grid { n1: 16, n2: 16, n3: 17 },
            plate: PlateParams::default(),
            time: TimeConfig {
                dt: 1e-3,
                t_final: 0.1,
                output_every: 10,
            },
            solver: SolverConfig::default(),
            initial: InitialSource::Preset(Preset::default()),
            output: OutputConfig {
                directory: PathBuf::from("output"),
                csv: true,
                snapshots: false,
            },
        }
    }
}

impl RunConfig {
    pub fn coupling(&self) -> CouplingConfig {
        let s = &self.solver;
        CouplingConfig {
            picard: PicardConfig {
                tol: s.picard_tol,
                max_iter: s.picard_max_iter,
                relaxation: s.relaxation,
            },
            fluid: FluidConfig {
                pressure: PressureConfig {
                    tol: s.pressure_tol,
                    max_iter: s.pressure_max_iter,
                },
                cfl_max: s.cfl_max,
                divergence_cleanup: s.divergence_cleanup,
                ..FluidConfig::default()
            },
            c_min: s.c_min,
            epsilon: s.epsilon_smallness,
        }
    }

    pub fn preset(&self) -> Option<&Preset> {
        match &self.initial {
            InitialSource::Preset(p) => Some(p),
            InitialSource::Snapshot(_) => None,
        }
    }

    /// The fully resolved configuration in the input format.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let p = &self.plate;
        let t = &self.time;
        let v = &self.solver;
        let _ = writeln!(s, "[grid]\nn1 = {}\nn2 = {}\nn3 = {}", g.n1, g.n2, g.n3);
        let _ = writeln!(
            s,
            "\n[physics]\nh = {:?}\nlambda = {:?}\nmu = {:?}\nnu = {:?}\ncurvature_model = {}\nplate_operator = {}",
            p.h,
            p.lambda,
            p.mu,
            p.nu,
            p.curvature_model.as_str(),
            p.operator.as_str()
        );
        let _ = writeln!(
            s,
            "\n[time]\ndt = {:?}\nt_final = {:?}\noutput_every = {}",
            t.dt, t.t_final, t.output_every
        );
        let _ = writeln!(
            s,
            "\n[solver]\npressure_tol = {:?}\npressure_max_iter = {}\npicard_tol = {:?}\npicard_max_iter = {}\n\
             relaxation = {:?}\ncfl_max = {:?}\ndivergence_cleanup = {}\nepsilon_smallness = {:?}\nc_min = {:?}\nc0 = {:?}",
            v.pressure_tol,
            v.pressure_max_iter,
            v.picard_tol,
            v.picard_max_iter,
            v.relaxation,
            v.cfl_max,
            v.divergence_cleanup,
            v.epsilon_smallness,
            v.c_min,
            v.c0
        );
        s.push_str("\n[initial_data]\n");
        match &self.initial {
            InitialSource::Preset(pr) => {
                let _ = writeln!(
                    s,
                    "preset = {}\namplitude = {:?}\nflow_amplitude = {:?}\nseed = {}\nmax_mode = {}",
                    pr.kind.as_str(),
                    pr.amplitude,
                    pr.flow_amplitude,
                    pr.seed,
                    pr.max_mode
                );
            }
            InitialSource::Snapshot(path) => {
                let _ = writeln!(s, "snapshot = {}", path.display());
            }
        }
        let o = &self.output;
        let _ = writeln!(
            s,
            "\n[output]\ndirectory = {}\ncsv = {}\nsnapshots = {}",
            o.directory.display(),
            o.csv,
            o.snapshots
        );
        s
    }
}

/// Accepted keys per section. `nu` is also accepted as `damping`.
const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["n1", "n2", "n3"]),
    (
        "physics",
        &[
            "h",
            "lambda",
            "mu",
            "nu",
            "damping",
            "curvature_model",
            "plate_operator",
        ],
    ),
    ("time", &["dt", "t_final", "output_every"]),
    (
        "solver",
        &[
            "pressure_tol",
            "pressure_max_iter",
            "picard_tol",
            "picard_max_iter",
            "relaxation",
            "cfl_max",
            "divergence_cleanup",
            "epsilon_smallness",
            "c_min",
            "c0",
        ],
    ),
    (
        "initial_data",
        &["preset", "amplitude", "flow_amplitude", "seed", "max_mode", "snapshot"],
    ),
    ("output", &["directory", "csv", "snapshots"]),
];

fn display_key(key: &str) -> &str {
    match key {
        "nu" | "damping" => "nu/damping",
        k => k,
    }
}

fn suggest(section: &str, key: &str) -> Option<String> {
    let mut best: Option<(usize, &str, &str)> = None;
    for (sec, keys) in KEYS {
        for k in *keys {
            let d = strsim::levenshtein(key, k);
            // prefer the current section on ties
            let rank = 2 * d + usize::from(*sec != section);
            if best.is_none_or(|(b, _, _)| rank < b) {
                best = Some((rank, sec, k));
            }
        }
    }
    let (rank, sec, k) = best?;
    let limit = (key.len() / 3).max(2);
    if rank / 2 > limit {
        return None;
    }
    if sec == section {
        Some(format!("\"{}\"", display_key(k)))
    } else {
        Some(format!("\"{}\" in [{sec}]", display_key(k)))
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Raw `section.key -> (line, value)` map.
fn read_entries(text: &str) -> Result<HashMap<String, Entry>, ConfigError> {
    let mut out: HashMap<String, Entry> = HashMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("unterminated section header `{s}`"),
            })?;
            let name = name.trim().to_string();
            if !KEYS.iter().any(|(sec, _)| *sec == name) {
                let names: Vec<&str> = KEYS.iter().map(|(s, _)| *s).collect();
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("unknown section [{name}]; expected one of {}", names.join(", ")),
                });
            }
            section = Some(name);
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, found `{s}`"),
        })?;
        let key = key.trim();
        let value = value.split('#').next().unwrap_or("").trim();
        let sec = section.clone().ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("key `{key}` appears before any [section]"),
        })?;
        let known = KEYS
            .iter()
            .find(|(s, _)| *s == sec)
            .map(|(_, k)| k.contains(&key))
            .unwrap_or(false);
        if !known {
            return Err(ConfigError::UnknownKey {
                line,
                section: sec.clone(),
                key: key.to_string(),
                suggestion: suggest(&sec, key),
            });
        }
        let canonical = if key == "damping" { "nu" } else { key };
        let full = format!("{sec}.{canonical}");
        if let Some(prev) = out.get(&full) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("`{key}` already set on line {}", prev.line),
            });
        }
        out.insert(
            full,
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    Ok(out)
}

struct Reader {
    entries: HashMap<String, Entry>,
}

impl Reader {
    fn line(&self, field: &str) -> usize {
        self.entries.get(field).map_or(0, |e| e.line)
    }

    fn get<T: FromStr>(&self, field: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(field) {
            None => Ok(default),
            Some(e) => e.value.parse::<T>().map_err(|err| ConfigError::Invalid {
                line: e.line,
                field: field.to_string(),
                message: format!("`{}`: {err}", e.value),
            }),
        }
    }

    fn flag(&self, field: &str, default: bool) -> Result<bool, ConfigError> {
        match self.entries.get(field) {
            None => Ok(default),
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(ConfigError::Invalid {
                    line: e.line,
                    field: field.to_string(),
                    message: format!("`{}` is not a boolean", e.value),
                }),
            },
        }
    }

    fn check(&self, field: &str, ok: bool, message: &str) -> Result<(), ConfigError> {
        if ok {
            return Ok(());
        }
        let line = self.line(field);
        if line == 0 {
            Err(ConfigError::Validation(format!("{field} {message}")))
        } else {
            Err(ConfigError::Invalid {
                line,
                field: field.to_string(),
                message: message.to_string(),
            })
        }
    }
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let r = Reader {
        entries: read_entries(text)?,
    };
    let d = RunConfig::default();

    let n1 = r.get("grid.n1", d.grid.n1)?;
    let n2 = r.get("grid.n2", d.grid.n2)?;
    let n3 = r.get("grid.n3", d.grid.n3)?;
    let grid = Grid::new(n1, n2, n3)?;

    let dp = d.plate;
    let plate = PlateParams {
        h: r.get("physics.h", dp.h)?,
        lambda: r.get("physics.lambda", dp.lambda)?,
        mu: r.get("physics.mu", dp.mu)?,
        nu: r.get("physics.nu", dp.nu)?,
        curvature_model: r.get::<CurvatureModel>("physics.curvature_model", dp.curvature_model)?,
        operator: r.get::<PlateOperator>("physics.plate_operator", dp.operator)?,
    };
    let finite = |x: f64| x.is_finite();
    r.check("physics.h", finite(plate.h) && plate.h > 0.0, "must be positive")?;
    r.check("physics.mu", finite(plate.mu) && plate.mu > 0.0, "must be positive")?;
    r.check(
        "physics.lambda",
        finite(plate.lambda) && plate.lambda + 2.0 * plate.mu > 0.0 && plate.lambda >= 0.0,
        "must be non-negative",
    )?;
    r.check(
        "physics.nu",
        finite(plate.nu) && plate.nu >= 0.0,
        "must be non-negative",
    )?;

    let time = TimeConfig {
        dt: r.get("time.dt", d.time.dt)?,
        t_final: r.get("time.t_final", d.time.t_final)?,
        output_every: r.get("time.output_every", d.time.output_every)?,
    };
    r.check("time.dt", finite(time.dt) && time.dt > 0.0, "must be positive")?;
    r.check(
        "time.t_final",
        finite(time.t_final) && time.t_final >= 0.0,
        "must be non-negative",
    )?;
    r.check("time.output_every", time.output_every >= 1, "must be at least 1")?;

    let ds = d.solver;
    let solver = SolverConfig {
        pressure_tol: r.get("solver.pressure_tol", ds.pressure_tol)?,
        pressure_max_iter: r.get("solver.pressure_max_iter", ds.pressure_max_iter)?,
        picard_tol: r.get("solver.picard_tol", ds.picard_tol)?,
        picard_max_iter: r.get("solver.picard_max_iter", ds.picard_max_iter)?,
        relaxation: r.get("solver.relaxation", ds.relaxation)?,
        cfl_max: r.get("solver.cfl_max", ds.cfl_max)?,
        divergence_cleanup: r.flag("solver.divergence_cleanup", ds.divergence_cleanup)?,
        epsilon_smallness: r.get("solver.epsilon_smallness", ds.epsilon_smallness)?,
        c_min: r.get("solver.c_min", ds.c_min)?,
        c0: r.get("solver.c0", ds.c0)?,
    };
    let positive = |x: f64| x.is_finite() && x > 0.0;
    r.check("solver.pressure_tol", positive(solver.pressure_tol), "must be positive")?;
    r.check(
        "solver.pressure_max_iter",
        solver.pressure_max_iter >= 1,
        "must be at least 1",
    )?;
    r.check("solver.picard_tol", positive(solver.picard_tol), "must be positive")?;
    r.check(
        "solver.picard_max_iter",
        solver.picard_max_iter >= 1,
        "must be at least 1",
    )?;
    r.check(
        "solver.relaxation",
        positive(solver.relaxation) && solver.relaxation <= 1.0,
        "must lie in (0, 1]",
    )?;
    r.check("solver.cfl_max", positive(solver.cfl_max), "must be positive")?;
    r.check(
        "solver.epsilon_smallness",
        positive(solver.epsilon_smallness),
        "must be positive",
    )?;
    r.check(
        "solver.c_min",
        positive(solver.c_min) && solver.c_min < 1.0,
        "must lie in (0, 1)",
    )?;
    r.check("solver.c0", positive(solver.c0), "must be positive")?;

    let initial = if let Some(e) = r.entries.get("initial_data.snapshot") {
        for k in ["preset", "amplitude", "flow_amplitude", "seed", "max_mode"] {
            let f = format!("initial_data.{k}");
            r.check(&f, !r.entries.contains_key(&f), "cannot be combined with snapshot")?;
        }
        InitialSource::Snapshot(PathBuf::from(&e.value))
    } else {
        let dp = Preset::default();
        let preset = Preset {
            kind: r.get::<PresetKind>("initial_data.preset", dp.kind)?,
            amplitude: r.get("initial_data.amplitude", dp.amplitude)?,
            flow_amplitude: r.get("initial_data.flow_amplitude", dp.flow_amplitude)?,
            seed: r.get("initial_data.seed", dp.seed)?,
            max_mode: r.get("initial_data.max_mode", dp.max_mode)?,
        };
        r.check("initial_data.amplitude", preset.amplitude.is_finite(), "must be finite")?;
        r.check(
            "initial_data.flow_amplitude",
            preset.flow_amplitude.is_finite(),
            "must be finite",
        )?;
        r.check("initial_data.max_mode", preset.max_mode >= 1, "must be at least 1")?;
        InitialSource::Preset(preset)
    };

    let output = OutputConfig {
        directory: r
            .entries
            .get("output.directory")
            .map_or(d.output.directory.clone(), |e| PathBuf::from(&e.value)),
        csv: r.flag("output.csv", d.output.csv)?,
        snapshots: r.flag("output.snapshots", d.output.snapshots)?,
    };

    Ok(RunConfig {
        grid,
        plate,
        time,
        solver,
        initial,
        output,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config_str(&text)?;
    // relative paths inside the file are taken from the file's directory
    if let InitialSource::Snapshot(p) = &mut cfg.initial {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}
