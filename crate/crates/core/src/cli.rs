//! Command line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, InitialSource, RunConfig};
use crate::coupling::{check_compatibility, nu_sweep, run_simulation, CouplingConfig, Simulator};
use crate::error::{ConfigError, CouplingError, Error};
use crate::geometry::GeometryState;
use crate::io::{encode_snapshot, load_snapshot, sweep_csv, sweep_spread_csv, CsvObserver, Snapshot};
use crate::presets::{build_initial_data, InitialData};
use crate::selftest::run_selftest;
use crate::spectral::Spectral;

#[derive(Debug, Parser)]
#[command(
    name = "kch",
    version,
    about = "Inviscid channel flow under a nonlinear Koiter plate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// March the coupled system to t_final and write diagnostics.
    Run(CommonArgs),
    /// Repeat a run for several damping values.
    SweepNu {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma separated damping values, e.g. 1e-2,1e-3,0
        #[arg(long, value_delimiter = ',', required = true)]
        nu_list: Vec<f64>,
    },
    /// Report compatibility and smallness of the initial data.
    Check(CommonArgs),
    /// Run the built-in property checks on small grids.
    Selftest {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides [output] directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Overrides [initial_data] seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

struct Log {
    quiet: bool,
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn load(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.output.directory = dir.clone();
    }
    if let Some(seed) = args.seed {
        match &mut cfg.initial {
            InitialSource::Preset(p) => p.seed = seed,
            InitialSource::Snapshot(_) => {
                return Err(ConfigError::Validation("--seed cannot be used with a snapshot".into()).into())
            }
        }
    }
    Ok(cfg)
}

fn initial_data(cfg: &RunConfig, spec: &Spectral) -> Result<InitialData, Error> {
    match &cfg.initial {
        InitialSource::Preset(p) => Ok(build_initial_data(spec, p)),
        InitialSource::Snapshot(path) => {
            let s = load_snapshot(path)?;
            if s.grid != cfg.grid {
                return Err(Error::Snapshot(format!(
                    "{} holds a {}x{}x{} grid but the configuration asks for {}x{}x{}",
                    path.display(),
                    s.grid.n1,
                    s.grid.n2,
                    s.grid.n3,
                    cfg.grid.n1,
                    cfg.grid.n2,
                    cfg.grid.n3
                )));
            }
            Ok(s.initial_data())
        }
    }
}

fn prepare(dir: &Path, cfg: &RunConfig) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config_used.ini"), cfg.to_ini())?;
    Ok(())
}

/// Worker cap from `KCH_THREADS`, else the machine's parallelism.
pub fn thread_cap() -> usize {
    std::env::var("KCH_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cmd_run(args: &CommonArgs) -> Result<(), Error> {
    let log = Log { quiet: args.quiet };
    let cfg = load(args)?;
    log.info(format!("configuration:\n{}", cfg.to_ini()));
    let spec = Spectral::new(cfg.grid);
    let data = initial_data(&cfg, &spec)?;
    let dir = cfg.output.directory.clone();
    prepare(&dir, &cfg)?;
    let sim = Simulator::new(spec, cfg.plate, cfg.coupling());
    let mut obs = CsvObserver::new(&dir, cfg.grid, cfg.output.csv, cfg.output.snapshots)?;
    let summary = run_simulation(&sim, &data, &cfg.time, Some(cfg.solver.c0), &mut obs);
    if let Some(e) = summary.io_error {
        return Err(e.into());
    }
    if let Some(state) = &summary.final_state {
        if cfg.output.snapshots {
            std::fs::write(
                dir.join("final.kch"),
                encode_snapshot(&Snapshot::from_state(cfg.grid, state)),
            )?;
        }
    }
    match summary.failure {
        Some((t, e)) => {
            eprintln!("run stopped at t = {t:?} after {} steps", summary.steps_completed);
            Err(e.into())
        }
        None => {
            log.info(format!(
                "completed {} steps; output in {}",
                summary.steps_completed,
                dir.display()
            ));
            Ok(())
        }
    }
}

fn cmd_sweep(args: &CommonArgs, nus: &[f64]) -> Result<(), Error> {
    let log = Log { quiet: args.quiet };
    if let Some(bad) = nus.iter().find(|n| !(n.is_finite() && **n >= 0.0)) {
        return Err(ConfigError::Validation(format!("--nu-list entry {bad} must be non-negative")).into());
    }
    let cfg = load(args)?;
    let spec = Spectral::new(cfg.grid);
    let data = initial_data(&cfg, &spec)?;
    let dir = cfg.output.directory.clone();
    prepare(&dir, &cfg)?;
    let threads = thread_cap();
    log.info(format!("sweeping {} damping values on {threads} worker(s)", nus.len()));
    let table = nu_sweep(&spec, &cfg.plate, &cfg.coupling(), &data, &cfg.time, nus, threads);
    std::fs::write(dir.join("sweep.csv"), sweep_csv(&table))?;
    std::fs::write(dir.join("sweep_spread.csv"), sweep_spread_csv(&table))?;
    if cfg.output.csv {
        for (i, row) in table.rows.iter().enumerate() {
            let sub = dir.join(format!("nu_{i:02}"));
            std::fs::create_dir_all(&sub)?;
            let mut text = crate::io::diagnostics_header();
            text.push('\n');
            for r in &row.records {
                text.push_str(&crate::io::diagnostics_row(r.t, &r.report));
                text.push('\n');
            }
            std::fs::write(sub.join("diagnostics.csv"), text)?;
        }
    }
    for row in &table.rows {
        match &row.error {
            None => log.info(format!("nu = {:?}: ok", row.nu)),
            Some((t, e)) => eprintln!("nu = {:?}: stopped at t = {t:?}: {e}", row.nu),
        }
    }
    log.info(format!(
        "spread of max v_H3.5 = {:.6}, max w_H5 = {:.6}",
        table.spread("v_H3.5"),
        table.spread("w_H5")
    ));
    match table.rows.iter().find_map(|r| r.error.clone()) {
        Some((_, e)) => Err(e.into()),
        None => Ok(()),
    }
}

fn cmd_check(args: &CommonArgs) -> Result<(), Error> {
    let cfg = load(args)?;
    let spec = Spectral::new(cfg.grid);
    let data = initial_data(&cfg, &spec)?;
    let report = check_compatibility(&spec, &data);
    println!("compatibility (tolerance 1e-10):\n{report}");
    let cc: CouplingConfig = cfg.coupling();
    match GeometryState::build(&spec, &data.plate.w, &data.plate.w_t, cc.c_min, cc.epsilon) {
        Ok(g) => println!("smallness (epsilon {}):\n{}", cc.epsilon, g.epsilon_report),
        Err(e) => println!("smallness: geometry rejected: {e}"),
    }
    if report.passed() {
        println!("initial data accepted");
        Ok(())
    } else {
        let names: Vec<String> = report
            .failures()
            .iter()
            .map(|i| format!("item {} ({})", i.index, i.name))
            .collect();
        Err(CouplingError::Compatibility(names.join(", ")).into())
    }
}

fn cmd_selftest(output_dir: Option<&Path>, quiet: bool) -> Result<(), Error> {
    let checks = run_selftest(output_dir);
    let mut failed = 0;
    for c in &checks {
        if !c.pass {
            failed += 1;
        }
        if !quiet || !c.pass {
            println!("{} {:<55} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        Err(Error::Selftest(failed))
    } else {
        Ok(())
    }
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn main_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::SweepNu { common, nu_list } => cmd_sweep(common, nu_list),
        Command::Check(a) => cmd_check(a),
        Command::Selftest {
            config,
            output_dir,
            quiet,
        } => {
            let dir = output_dir.clone().or_else(|| {
                config
                    .as_ref()
                    .and_then(|c| parse_config(c).ok())
                    .map(|c| c.output.directory)
            });
            cmd_selftest(dir.as_deref(), *quiet)
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
