//! Output formats.
//!
//! Diagnostics CSV: header `time,<NormReport fields>`, one row per output
//! time, floats in shortest round-trip form.
//!
//! Snapshot layout, all little endian:
//!
//! | offset | size | content                                  |
//! |--------|------|------------------------------------------|
//! | 0      | 4    | magic `KCH1`                             |
//! | 4      | 12   | `n1`, `n2`, `n3` as `u32`                |
//! | 16     | 8    | time `t` as `f64`                        |
//! | 24     | ...  | `w`, `w_t` (`n1 n2` each), then `v1`, `v2`, `v3`, `q` (`n1 n2 n3` each), as `f64` |
//!
//! Surface arrays are indexed `i1 n2 + i2`; volume arrays are level-major,
//! `l n1 n2 + i1 n2 + i2`.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::coupling::{Observer, PicardLog, Record, SweepTable, SystemState};
use crate::diagnostics::{NormReport, MONITORED};
use crate::error::Error;
use crate::fluid::VectorField;
use crate::grid::{Grid, Surface, Volume};
use crate::plate::PlateState;
use crate::presets::InitialData;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"KCH1";
const HEADER_LEN: usize = 24;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn diagnostics_header() -> String {
    let mut h = String::from("time");
    for f in NormReport::FIELDS {
        h.push(',');
        h.push_str(f);
    }
    h
}

pub fn diagnostics_row(t: f64, r: &NormReport) -> String {
    let mut s = fmt_f64(t);
    for v in r.values() {
        s.push(',');
        s.push_str(&fmt_f64(v));
    }
    s
}

pub const PICARD_HEADER: &str = "step,time,iterations,final_difference,ratio,pressure_iterations,divergence";

pub fn picard_row(step: usize, log: &PicardLog) -> String {
    format!(
        "{step},{},{},{},{},{},{}",
        fmt_f64(log.t),
        log.iterations,
        fmt_f64(log.final_difference()),
        fmt_f64(log.ratio),
        log.pressure_iterations,
        fmt_f64(log.divergence)
    )
}

pub fn monitor_header() -> String {
    let mut h = String::from("time,M,C0,within");
    for f in MONITORED {
        h.push_str(",margin_");
        h.push_str(f);
    }
    h
}

pub fn monitor_row(rec: &Record) -> String {
    let m = &rec.monitor;
    let mut s = format!("{},{},{},{}", fmt_f64(rec.t), fmt_f64(m.m), fmt_f64(m.c0), m.within);
    for e in &m.entries {
        s.push(',');
        s.push_str(&fmt_f64(e.margin));
    }
    s
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per damping value: the max over time of every column.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut s = String::from("nu");
    for f in NormReport::FIELDS {
        s.push_str(",max_");
        s.push_str(f);
    }
    s.push_str(",status\n");
    for row in &table.rows {
        s.push_str(&fmt_f64(row.nu));
        for v in row.max_report.values() {
            s.push(',');
            s.push_str(&fmt_f64(v));
        }
        s.push(',');
        match &row.error {
            None => s.push_str("ok"),
            Some((t, e)) => s.push_str(&quote(&format!("failed at t = {t:?}: {e}"))),
        }
        s.push('\n');
    }
    s
}

/// `column,spread` with the max/min ratio over damping values.
pub fn sweep_spread_csv(table: &SweepTable) -> String {
    let mut s = String::from("column,spread\n");
    for f in NormReport::FIELDS {
        s.push_str(&format!("{f},{}\n", fmt_f64(table.spread(f))));
    }
    s
}

/// Writes the diagnostics of one run as it progresses. Every row is flushed
/// so that a guarded stop leaves the rows written so far.
pub struct CsvObserver {
    dir: PathBuf,
    grid: Grid,
    diagnostics: Option<BufWriter<File>>,
    picard: Option<BufWriter<File>>,
    monitor: Option<BufWriter<File>>,
    snapshots: bool,
}

fn create(path: &Path, header: &str) -> io::Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    w.flush()?;
    Ok(w)
}

fn line(w: &mut Option<BufWriter<File>>, row: &str) -> io::Result<()> {
    if let Some(w) = w {
        writeln!(w, "{row}")?;
        w.flush()?;
    }
    Ok(())
}

impl CsvObserver {
    pub fn new(dir: &Path, grid: Grid, csv: bool, snapshots: bool) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let (diagnostics, picard, monitor) = if csv {
            (
                Some(create(&dir.join("diagnostics.csv"), &diagnostics_header())?),
                Some(create(&dir.join("picard.csv"), PICARD_HEADER)?),
                Some(create(&dir.join("monitor.csv"), &monitor_header())?),
            )
        } else {
            (None, None, None)
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            grid,
            diagnostics,
            picard,
            monitor,
            snapshots,
        })
    }
}

impl Observer for CsvObserver {
    fn record(&mut self, rec: &Record) -> io::Result<()> {
        line(&mut self.diagnostics, &diagnostics_row(rec.t, &rec.report))?;
        line(&mut self.monitor, &monitor_row(rec))
    }

    fn picard(&mut self, step: usize, log: &PicardLog) -> io::Result<()> {
        line(&mut self.picard, &picard_row(step, log))
    }

    fn state(&mut self, step: usize, state: &SystemState) -> io::Result<()> {
        if self.snapshots {
            let bytes = encode_snapshot(&Snapshot::from_state(self.grid, state));
            std::fs::write(self.dir.join(format!("snapshot_{step:06}.kch")), bytes)?;
        }
        Ok(())
    }
}

/// Everything needed to restart from a saved time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    pub t: f64,
    pub w: Surface,
    pub w_t: Surface,
    pub v: VectorField,
    pub q: Volume,
}

impl Snapshot {
    pub fn from_state(grid: Grid, s: &SystemState) -> Self {
        Self {
            grid,
            t: s.t,
            w: s.plate.w.clone(),
            w_t: s.plate.w_t.clone(),
            v: s.fluid.v.clone(),
            q: s.fluid.q.clone(),
        }
    }

    pub fn initial_data(&self) -> InitialData {
        InitialData {
            plate: PlateState {
                w: self.w.clone(),
                w_t: self.w_t.clone(),
                t: self.t,
            },
            v: self.v.clone(),
        }
    }
}

pub fn encode_snapshot(s: &Snapshot) -> Vec<u8> {
    let g = s.grid;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (2 * g.plane() + 4 * g.volume()));
    out.extend_from_slice(SNAPSHOT_MAGIC);
    for n in [g.n1, g.n2, g.n3] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&s.t.to_le_bytes());
    let fields: [&[f64]; 6] = [
        s.w.as_slice(),
        s.w_t.as_slice(),
        s.v[0].as_slice(),
        s.v[1].as_slice(),
        s.v[2].as_slice(),
        s.q.as_slice(),
    ];
    for f in fields {
        for x in f {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot, Error> {
    let bad = |m: String| Error::Snapshot(m);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(bad(format!("bad magic {:?}, expected KCH1", &bytes[..4])));
    }
    let u = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let grid = Grid::new(u(4), u(8), u(12)).map_err(|e| bad(e.to_string()))?;
    let t = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let (m, v) = (grid.plane(), grid.volume());
    let expect = HEADER_LEN + 8 * (2 * m + 4 * v);
    if bytes.len() != expect {
        return Err(bad(format!(
            "size {} does not match a {}x{}x{} grid ({expect} bytes)",
            bytes.len(),
            grid.n1,
            grid.n2,
            grid.n3
        )));
    }
    let mut at = HEADER_LEN;
    let mut take = |n: usize| -> Vec<f64> {
        let out = bytes[at..at + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        at += 8 * n;
        out
    };
    let w = Surface(take(m));
    let w_t = Surface(take(m));
    let v = [Volume(take(v)), Volume(take(v)), Volume(take(v))];
    let q = Volume(take(grid.volume()));
    Ok(Snapshot { grid, t, w, w_t, v, q })
}

pub fn save_snapshot(path: &Path, s: &Snapshot) -> Result<(), Error> {
    std::fs::write(path, encode_snapshot(s))?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot, Error> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::Snapshot(format!("cannot read {}: {e}", path.display())))?;
    decode_snapshot(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshot(g: Grid) -> Snapshot {
        let s = |k: f64| Surface::from_fn(&g, |x, y| (k * x + y).sin() + 1e-300);
        let v = |k: f64| Volume::from_fn(&g, |x, y, z| (k * x - y * z).cos() / 3.0);
        Snapshot {
            grid: g,
            t: 0.1 + 0.2,
            w: s(1.0),
            w_t: s(2.0),
            v: [v(1.0), v(2.0), v(3.0)],
            q: v(4.0),
        }
    }

    #[test]
    fn snapshot_round_trip_is_byte_identical() {
        let g = Grid::new(16, 8, 9).unwrap();
        let s = snapshot(g);
        let a = encode_snapshot(&s);
        let back = decode_snapshot(&a).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode_snapshot(&back), a);
        assert_eq!(&a[..4], b"KCH1");
        assert_eq!(a.len(), 24 + 8 * (2 * 128 + 4 * 1152));
    }

    #[test]
    fn corrupt_snapshots_are_rejected() {
        let g = Grid::new(8, 8, 9).unwrap();
        let mut a = encode_snapshot(&snapshot(g));
        assert!(decode_snapshot(&a[..a.len() - 1]).is_err());
        a[0] = b'X';
        assert!(decode_snapshot(&a).unwrap_err().to_string().contains("magic"));
        assert_eq!(decode_snapshot(&a[..10]).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1 + 0.2, 1e-300, -2.5e17, 0.0, 1.0 / 3.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        let h = diagnostics_header();
        assert!(h.starts_with("time,v_H3.5,w_H5,"));
        assert_eq!(h.split(',').count(), 15);
        assert_eq!(diagnostics_row(0.0, &NormReport::default()).split(',').count(), 15);
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("ok"), "ok");
        assert_eq!(quote("a, \"b\""), "\"a, \"\"b\"\"\"");
    }
}
