//! Fluid-plate coupling: compatibility gate, Picard iteration per time step,
//! the time march and the damping sweep.
//!
//! Each step iterates geometry → fluid and pressure → plate until the plate
//! trajectory, velocity and pressure stop changing. The iterate for the plate
//! at the end of the step starts from the explicit predictor `w + dt w_t`.

use std::fmt;

use crate::diagnostics::{
    apriori_monitor, data_size, energy_report, interface_residual, sobolev_surface, MonitorReport, NormReport,
    DEFAULT_C0,
};
use crate::error::CouplingError;
use crate::fluid::{ale_divergence, FluidConfig, FluidSolver, FluidState, StepData, VectorField};
use crate::geometry::{GeometryState, DEFAULT_C_MIN};
use crate::grid::Surface;
use crate::plate::{plate_step, PlateParams, PlateState};
use crate::presets::InitialData;
use crate::spectral::Spectral;

/// Tolerance of every compatibility item.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the newest plate iterate, in `(0, 1]`.
    pub relaxation: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 30,
            relaxation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConfig {
    pub picard: PicardConfig,
    pub fluid: FluidConfig,
    pub c_min: f64,
    /// Threshold for the six smallness quantities.
    pub epsilon: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            picard: PicardConfig::default(),
            fluid: FluidConfig::default(),
            c_min: DEFAULT_C_MIN,
            epsilon: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SystemState {
    pub plate: PlateState,
    pub fluid: FluidState,
    pub geom: GeometryState,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityItem {
    pub index: usize,
    pub name: &'static str,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub items: Vec<CompatibilityItem>,
}

impl CompatibilityReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn failures(&self) -> Vec<&CompatibilityItem> {
        self.items.iter().filter(|i| !i.pass).collect()
    }

    pub fn item(&self, index: usize) -> &CompatibilityItem {
        &self.items[index - 1]
    }
}

impl fmt::Display for CompatibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.items {
            writeln!(
                f,
                "  [{}] {:<28} residual {:.3e}  {}",
                i.index,
                i.name,
                i.residual,
                if i.pass { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Largest relative amplitude outside the dealiased band (0 when resolved,
/// infinite when not finite).
fn resolution_residual(spec: &Spectral, fields: &[&[f64]]) -> f64 {
    let mut worst = 0.0_f64;
    for f in fields {
        if f.iter().any(|x| !x.is_finite()) {
            return f64::INFINITY;
        }
        let scale = f.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            continue;
        }
        let g = *spec.grid();
        let m = g.plane();
        for chunk in f.chunks(m) {
            let d = spec.dealias_slice(chunk);
            let r = chunk.iter().zip(&d).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
            worst = worst.max(r / scale);
        }
    }
    worst
}

/// Checks the six compatibility conditions on initial data.
pub fn check_compatibility(spec: &Spectral, data: &InitialData) -> CompatibilityReport {
    let grid = *spec.grid();
    let v = &data.v;
    let w0 = &data.plate.w;
    let w1 = &data.plate.w_t;
    let mut slices: Vec<&[f64]> = v.iter().map(|f| f.as_slice()).collect();
    slices.push(w0.as_slice());
    slices.push(w1.as_slice());
    let item1 = resolution_residual(spec, &slices);
    let finite = item1.is_finite();
    let item2 = w0.max_abs();
    let item3 = w1.mean().abs();
    // at t = 0 the geometry is flat and item 6 reduces to v3 = w1 on top
    let geom = if finite {
        GeometryState::build(spec, w0, w1, 0.0, f64::INFINITY).unwrap_or_else(|_| GeometryState::flat(spec))
    } else {
        GeometryState::flat(spec)
    };
    let item4 = if finite {
        ale_divergence(spec, v, &geom).max_abs()
    } else {
        f64::INFINITY
    };
    let item5 = v[2].bottom(&grid).max_abs();
    let item6 = if finite {
        interface_residual(spec, v, w1, &geom)
    } else {
        f64::INFINITY
    };
    let mk = |index, name, r: f64| CompatibilityItem {
        index,
        name,
        residual: r,
        pass: r <= COMPATIBILITY_TOL,
    };
    CompatibilityReport {
        items: vec![
            mk(1, "finite and resolved data", item1),
            mk(2, "initial displacement w(0)", item2),
            mk(3, "mean of plate velocity w1", item3),
            mk(4, "discrete divergence of v0", item4),
            mk(5, "v0_3 on bottom wall", item5),
            mk(6, "normal velocity - w1 on top wall", item6),
        ],
    }
}

/// Per-step record of the Picard iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardLog {
    pub t: f64,
    pub iterations: usize,
    /// Relative differences `(V, Q, W)` per iteration.
    pub differences: Vec<[f64; 3]>,
    /// Ratio of the last two iteration differences (0 when converged at once).
    pub ratio: f64,
    pub pressure_iterations: usize,
    pub divergence: f64,
}

impl PicardLog {
    pub fn final_difference(&self) -> f64 {
        self.differences
            .last()
            .map(|d| d.iter().fold(0.0_f64, |m, x| m.max(*x)))
            .unwrap_or(0.0)
    }
}

fn relative(diff: f64, size: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if size == 0.0 {
        f64::INFINITY
    } else {
        diff / size
    }
}

fn vec_l2(spec: &Spectral, v: &VectorField) -> f64 {
    let g = spec.grid();
    v.iter().map(|f| f.l2(g).powi(2)).sum::<f64>().sqrt()
}

fn vec_sub(a: &VectorField, b: &VectorField) -> VectorField {
    [a[0].sub(&b[0]), a[1].sub(&b[1]), a[2].sub(&b[2])]
}

/// The coupled solver for one grid and one set of plate parameters.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub fluid: FluidSolver,
    pub params: PlateParams,
    pub cfg: CouplingConfig,
}

impl Simulator {
    pub fn new(spec: Spectral, params: PlateParams, cfg: CouplingConfig) -> Self {
        Self {
            fluid: FluidSolver::new(spec, cfg.fluid),
            params,
            cfg,
        }
    }

    pub fn spec(&self) -> &Spectral {
        self.fluid.spec()
    }

    fn geometry(&self, plate: &PlateState) -> Result<GeometryState, CouplingError> {
        let g = GeometryState::build(self.spec(), &plate.w, &plate.w_t, self.cfg.c_min, self.cfg.epsilon)?;
        if let Some(e) = g.epsilon_report.violation() {
            return Err(e.into());
        }
        Ok(g)
    }

    /// Checks compatibility and solves the initial pressure.
    ///
    /// Data at `t > 0` (a restart) is exempt from items 2 and 4, which only
    /// hold exactly for data at the initial time, and from the band limit in
    /// item 1, since evolved fields carry energy past the 2/3 cutoff. It must
    /// still be finite.
    pub fn initialize(&self, data: &InitialData) -> Result<SystemState, CouplingError> {
        let report = check_compatibility(self.spec(), data);
        let restart = data.plate.t > 0.0;
        let failures: Vec<&CompatibilityItem> = report
            .failures()
            .into_iter()
            .filter(|i| !(restart && (i.index == 2 || i.index == 4 || (i.index == 1 && i.residual.is_finite()))))
            .collect();
        if !failures.is_empty() {
            let msg: Vec<String> = failures
                .iter()
                .map(|i| format!("item {} ({}) residual {:.3e}", i.index, i.name, i.residual))
                .collect();
            return Err(CouplingError::Compatibility(msg.join("; ")));
        }
        let geom = self.geometry(&data.plate)?;
        let (q, _) = self
            .fluid
            .solve_pressure(&data.v, &geom, &data.plate, &self.params, None)?;
        Ok(SystemState {
            plate: data.plate.clone(),
            fluid: FluidState {
                v: data.v.clone(),
                q,
                t: data.plate.t,
            },
            geom,
            t: data.plate.t,
        })
    }

    /// Advances the coupled system by one step of size `dt`.
    pub fn step(&self, state: &SystemState, dt: f64) -> Result<(SystemState, PicardLog), CouplingError> {
        let spec = self.spec();
        let pc = self.cfg.picard;
        let mut iterate = PlateState {
            w: state.plate.w.add(&state.plate.w_t.scaled(dt)),
            w_t: state.plate.w_t.clone(),
            t: state.t + dt,
        };
        let mut prev_v = state.fluid.v.clone();
        let mut prev_q = state.fluid.q.clone();
        let mut differences = Vec::new();
        let first = self
            .fluid
            .first_stage(&state.fluid, &state.geom, &state.plate, &self.params, dt)?;
        let mut pressure_iterations = first.solution.history.len();
        for _ in 0..pc.max_iter.max(1) {
            let geom_end = self.geometry(&iterate)?;
            let plate_mid = PlateState::midpoint(&state.plate, &iterate);
            let geom_mid = self.geometry(&plate_mid)?;
            let out = self.fluid.step_from(
                &state.fluid,
                &first,
                StepData {
                    geom_start: &state.geom,
                    geom_mid: &geom_mid,
                    geom_end: &geom_end,
                    plate_start: &state.plate,
                    plate_mid: &plate_mid,
                    plate_end: &iterate,
                },
                &self.params,
                dt,
            )?;
            pressure_iterations += out.pressure_iterations;
            let forcing = center(&out.plate_forcing);
            let solved = plate_step(spec, &state.plate, &forcing, &self.params, dt)?;

            let dv = relative(
                vec_l2(spec, &vec_sub(&out.state.v, &prev_v)),
                vec_l2(spec, &out.state.v),
            );
            let g = spec.grid();
            let dq = relative(out.state.q.sub(&prev_q).l2(g), out.state.q.l2(g));
            let dw = relative(
                sobolev_surface(spec, &solved.w.sub(&iterate.w), 2.0),
                sobolev_surface(spec, &solved.w, 2.0),
            );
            let dwt = relative(solved.w_t.sub(&iterate.w_t).l2(), solved.w_t.l2());
            let diff = [dv, dq, dw.max(dwt)];
            differences.push(diff);
            let converged = diff.iter().all(|d| *d <= pc.tol);
            let relaxed = if pc.relaxation == 1.0 {
                solved.clone()
            } else {
                PlateState {
                    w: Surface::lincomb(pc.relaxation, &solved.w, 1.0 - pc.relaxation, &iterate.w),
                    w_t: Surface::lincomb(pc.relaxation, &solved.w_t, 1.0 - pc.relaxation, &iterate.w_t),
                    t: solved.t,
                }
            };
            if converged {
                let geom = if solved == iterate {
                    geom_end
                } else {
                    self.geometry(&solved)?
                };
                let log = PicardLog {
                    t: solved.t,
                    iterations: differences.len(),
                    ratio: ratio(&differences),
                    differences,
                    pressure_iterations,
                    divergence: out.divergence,
                };
                let t = solved.t;
                return Ok((
                    SystemState {
                        plate: solved,
                        fluid: out.state,
                        geom,
                        t,
                    },
                    log,
                ));
            }
            iterate = relaxed;
            prev_v = out.state.v;
            prev_q = out.state.q;
        }
        let last = differences.last().copied().unwrap_or([f64::NAN; 3]);
        Err(CouplingError::NonContraction {
            iterations: differences.len(),
            difference: last.iter().fold(0.0_f64, |m, x| m.max(*x)),
            ratio: ratio(&differences),
        })
    }

    pub fn report(&self, state: &SystemState) -> NormReport {
        energy_report(
            self.spec(),
            &self.params,
            &state.plate,
            &state.fluid.v,
            &state.fluid.q,
            &state.geom,
        )
    }
}

/// Removes the roundoff-level mean left by the pressure normalisation.
fn center(f: &Surface) -> Surface {
    let m = f.mean();
    f.map(|x| x - m)
}

fn ratio(d: &[[f64; 3]]) -> f64 {
    let n = d.len();
    if n < 2 {
        return 0.0;
    }
    let a = d[n - 2].iter().fold(0.0_f64, |m, x| m.max(*x));
    let b = d[n - 1].iter().fold(0.0_f64, |m, x| m.max(*x));
    if a > 0.0 {
        b / a
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub output_every: usize,
}

impl TimeConfig {
    /// Number of steps to reach `t_final`; at least one for a positive horizon.
    pub fn steps(&self) -> usize {
        let n = (self.t_final / self.dt).round() as usize;
        if self.t_final > 0.0 {
            n.max(1)
        } else {
            n
        }
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub step: usize,
    pub t: f64,
    pub report: NormReport,
    pub monitor: MonitorReport,
}

/// Sink for records produced during a run.
pub trait Observer {
    fn record(&mut self, _record: &Record) -> std::io::Result<()> {
        Ok(())
    }
    fn picard(&mut self, _step: usize, _log: &PicardLog) -> std::io::Result<()> {
        Ok(())
    }
    fn state(&mut self, _step: usize, _state: &SystemState) -> std::io::Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Collects everything in memory.
#[derive(Debug, Default, Clone)]
pub struct Collect {
    pub records: Vec<Record>,
    pub picard: Vec<PicardLog>,
}

impl Observer for Collect {
    fn record(&mut self, record: &Record) -> std::io::Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
    fn picard(&mut self, _step: usize, log: &PicardLog) -> std::io::Result<()> {
        self.picard.push(log.clone());
        Ok(())
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub steps_completed: usize,
    pub final_state: Option<SystemState>,
    /// Time and cause of a guarded stop.
    pub failure: Option<(f64, CouplingError)>,
    pub io_error: Option<std::io::Error>,
}

impl RunSummary {
    pub fn completed(&self) -> bool {
        self.failure.is_none() && self.io_error.is_none()
    }
}

/// Marches from `data` to `t_final`, handing records to `observer` as they
/// are produced so that partial output survives a failure.
pub fn run_simulation(
    sim: &Simulator,
    data: &InitialData,
    time: &TimeConfig,
    c0: Option<f64>,
    observer: &mut dyn Observer,
) -> RunSummary {
    let c0 = c0.unwrap_or(DEFAULT_C0);
    let mut state = match sim.initialize(data) {
        Ok(s) => s,
        Err(e) => {
            return RunSummary {
                steps_completed: 0,
                final_state: None,
                failure: Some((data.plate.t, e)),
                io_error: None,
            }
        }
    };
    let initial = sim.report(&state);
    let m = data_size(&initial);
    let emit = |obs: &mut dyn Observer, step: usize, st: &SystemState, rep: NormReport| {
        let rec = Record {
            step,
            t: st.t,
            monitor: apriori_monitor(&rep, m, c0),
            report: rep,
        };
        obs.record(&rec)
    };
    let mut summary = RunSummary {
        steps_completed: 0,
        final_state: None,
        failure: None,
        io_error: None,
    };
    if let Err(e) = emit(observer, 0, &state, initial).and_then(|_| observer.state(0, &state)) {
        summary.io_error = Some(e);
        summary.final_state = Some(state);
        return summary;
    }
    let every = time.output_every.max(1);
    let steps = time.steps();
    for n in 1..=steps {
        match sim.step(&state, time.dt) {
            Ok((next, log)) => {
                state = next;
                summary.steps_completed = n;
                let io = observer.picard(n, &log).and_then(|_| {
                    if n % every == 0 || n == steps {
                        emit(observer, n, &state, sim.report(&state)).and_then(|_| observer.state(n, &state))
                    } else {
                        Ok(())
                    }
                });
                if let Err(e) = io {
                    summary.io_error = Some(e);
                    break;
                }
            }
            Err(e) => {
                summary.failure = Some((state.t, e));
                break;
            }
        }
    }
    summary.final_state = Some(state);
    summary
}

/// Result of one run within a damping sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub nu: f64,
    /// Max over output times of every report column.
    pub max_report: NormReport,
    pub records: Vec<Record>,
    /// Time and cause of a guarded stop.
    pub error: Option<(f64, CouplingError)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// `max / min` over successful rows of the named column.
    pub fn spread(&self, column: &str) -> f64 {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.error.is_none())
            .filter_map(|r| r.max_report.get(column))
            .collect();
        if vals.is_empty() {
            return f64::NAN;
        }
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 && min == 0.0 {
            1.0
        } else {
            max / min
        }
    }
}

fn max_report(records: &[Record]) -> NormReport {
    let mut out = [0.0_f64; 14];
    for r in records {
        for (o, v) in out.iter_mut().zip(r.report.values()) {
            *o = o.max(v);
        }
    }
    NormReport {
        v_h35: out[0],
        w_h5: out[1],
        wt_h3: out[2],
        q_h25: out[3],
        psi_h55: out[4],
        psit_h35: out[5],
        e_h45: out[6],
        e_minus_i_sup: out[7],
        j_minus_1_sup: out[8],
        kinetic: out[9],
        koiter: out[10],
        total_energy: out[11],
        interface_residual: out[12],
        piola_residual: out[13],
    }
}

/// Runs the same data for every damping value in `nus`, using up to
/// `threads` concurrent runs. Row order follows `nus`.
pub fn nu_sweep(
    spec: &Spectral,
    params: &PlateParams,
    cfg: &CouplingConfig,
    data: &InitialData,
    time: &TimeConfig,
    nus: &[f64],
    threads: usize,
) -> SweepTable {
    let run_one = |nu: f64| -> SweepRow {
        let sim = Simulator::new(spec.clone(), PlateParams { nu, ..*params }, *cfg);
        let mut obs = Collect::default();
        let summary = run_simulation(&sim, data, time, None, &mut obs);
        SweepRow {
            nu,
            max_report: max_report(&obs.records),
            records: obs.records,
            error: summary.failure,
        }
    };
    let threads = threads.max(1);
    let mut rows: Vec<Option<SweepRow>> = vec![None; nus.len()];
    for (chunk_idx, chunk) in nus.chunks(threads).enumerate() {
        let results: Vec<SweepRow> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|&nu| s.spawn(move || run_one(nu))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        });
        for (i, r) in results.into_iter().enumerate() {
            rows[chunk_idx * threads + i] = Some(r);
        }
    }
    SweepTable {
        rows: rows.into_iter().map(|r| r.expect("every run reported")).collect(),
    }
}
