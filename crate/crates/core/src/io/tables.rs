//! CSV emission and parsing. Reals are written with 17 significant digits,
//! which round-trips every `f64` exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::analysis::{Channel, DoublingReport, RateFit};
use crate::grid::{FieldState, RadialGrid};
use crate::solver::{Snapshot, SnapshotKind, SupNormSeries};

pub const SERIES_COLUMNS: [&str; 8] = [
    "t",
    "M_u",
    "M_v",
    "max_u",
    "max_v",
    "max_grad_u",
    "max_grad_v",
    "argmax_r_u",
];
pub const FIT_COLUMNS: [&str; 10] = [
    "channel",
    "T_est",
    "exponent",
    "predicted_exponent",
    "rel_error",
    "amplitude",
    "rms_residual",
    "window_lo",
    "window_hi",
    "points_used",
];
pub const DOUBLING_COLUMNS: [&str; 4] = ["j", "t_j", "D_j", "ratio_j"];
pub const SNAPSHOT_COLUMNS: [&str; 9] =
    ["step", "kind", "level", "lag", "t", "M_u", "M_v", "r", "u"];

/// `{:.16e}`: one digit before the point and sixteen after.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, IoError> {
    let file = std::fs::File::create(path).map_err(|e| IoError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IoError> {
    let file = std::fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    IoError::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn check_header(
    path: &Path,
    rdr: &mut csv::Reader<std::fs::File>,
    want: &[&str],
) -> Result<(), IoError> {
    let got = rdr.headers().map_err(|e| csv_err(path, e))?;
    if got.iter().ne(want.iter().copied()) {
        return Err(IoError::Csv {
            path: path.display().to_string(),
            message: format!(
                "expected columns {want:?}, found {:?}",
                got.iter().collect::<Vec<_>>()
            ),
        });
    }
    Ok(())
}

/// Writes rows of preformatted cells under a header.
pub fn write_table<S: AsRef<str>>(
    path: &Path,
    header: &[&str],
    rows: &[Vec<S>],
) -> Result<(), IoError> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|c| c.as_ref()))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn write_series(path: &Path, s: &SupNormSeries) -> Result<(), IoError> {
    let rows: Vec<Vec<String>> = (0..s.len())
        .map(|k| {
            [
                s.t[k],
                s.m_u[k],
                s.m_v[k],
                s.max_u[k],
                s.max_v[k],
                s.max_grad_u[k],
                s.max_grad_v[k],
                s.argmax_r_u[k],
            ]
            .into_iter()
            .map(real)
            .collect()
        })
        .collect();
    write_table(path, &SERIES_COLUMNS, &rows)
}

pub fn read_series(path: &Path) -> Result<SupNormSeries, IoError> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &SERIES_COLUMNS)?;
    let mut s = SupNormSeries::default();
    for row in rdr.deserialize() {
        let r: [f64; 8] = row.map_err(|e| csv_err(path, e))?;
        s.push(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7]);
    }
    Ok(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct FitRow {
    channel: Channel,
    #[serde(rename = "T_est")]
    t_est: f64,
    exponent: f64,
    predicted_exponent: f64,
    rel_error: f64,
    amplitude: f64,
    rms_residual: f64,
    window_lo: f64,
    window_hi: f64,
    points_used: usize,
}

pub fn write_fits(path: &Path, fits: &[RateFit]) -> Result<(), IoError> {
    let rows: Vec<Vec<String>> = fits
        .iter()
        .map(|f| {
            let mut row = vec![f.channel.name().to_string()];
            row.extend(
                [
                    f.t_est,
                    f.exponent,
                    f.predicted_exponent,
                    f.rel_error(),
                    f.amplitude,
                    f.rms_residual,
                    f.window.0,
                    f.window.1,
                ]
                .into_iter()
                .map(real),
            );
            row.push(f.points_used.to_string());
            row
        })
        .collect();
    write_table(path, &FIT_COLUMNS, &rows)
}

pub fn read_fits(path: &Path) -> Result<Vec<RateFit>, IoError> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &FIT_COLUMNS)?;
    rdr.deserialize()
        .map(|row| {
            let r: FitRow = row.map_err(|e| csv_err(path, e))?;
            Ok(RateFit {
                channel: r.channel,
                t_est: r.t_est,
                exponent: r.exponent,
                predicted_exponent: r.predicted_exponent,
                amplitude: r.amplitude,
                rms_residual: r.rms_residual,
                window: (r.window_lo, r.window_hi),
                points_used: r.points_used,
            })
        })
        .collect()
}

/// One row per doubling time; `D_j` and `ratio_j` are empty where the
/// sequence is shorter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    pub j: usize,
    pub t_j: f64,
    #[serde(rename = "D_j")]
    pub d_j: Option<f64>,
    pub ratio_j: Option<f64>,
}

pub fn write_doubling(path: &Path, rep: &DoublingReport) -> Result<(), IoError> {
    let opt = |x: Option<&f64>| x.map_or(String::new(), |x| real(*x));
    let rows: Vec<Vec<String>> = rep
        .t_j
        .iter()
        .enumerate()
        .map(|(j, t)| {
            vec![
                j.to_string(),
                real(*t),
                opt(rep.d_j.get(j)),
                opt(rep.ratio_j.get(j)),
            ]
        })
        .collect();
    write_table(path, &DOUBLING_COLUMNS, &rows)
}

pub fn read_doubling(path: &Path) -> Result<Vec<DoublingRow>, IoError> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &DOUBLING_COLUMNS)?;
    rdr.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

/// Long format: one row per snapshot and node. `v` follows `u` in a
/// final column so that scalar consumers can ignore it.
pub fn write_snapshots(
    path: &Path,
    snapshots: &[Snapshot],
    grid: &RadialGrid,
) -> Result<(), IoError> {
    let mut header = SNAPSHOT_COLUMNS.to_vec();
    header.push("v");
    let mut w = writer(path)?;
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for s in snapshots {
        let (kind, level, lag) = match s.kind {
            SnapshotKind::Initial => ("initial", String::new(), String::new()),
            SnapshotKind::Stride => ("stride", String::new(), String::new()),
            SnapshotKind::Doubling { level, lag } => {
                ("doubling", level.to_string(), lag.to_string())
            }
            SnapshotKind::Final => ("final", String::new(), String::new()),
        };
        for (i, r) in grid.coords().enumerate() {
            w.write_record([
                s.step.to_string(),
                kind.to_string(),
                level.clone(),
                lag.clone(),
                real(s.state.t),
                real(s.m_u),
                real(s.m_v),
                real(r),
                real(s.state.u[i]),
                real(s.state.v[i]),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

#[derive(Debug, Deserialize)]
struct SnapshotRow {
    step: u64,
    kind: String,
    level: Option<u32>,
    lag: Option<u32>,
    t: f64,
    #[serde(rename = "M_u")]
    m_u: f64,
    #[serde(rename = "M_v")]
    m_v: f64,
    #[allow(dead_code)]
    r: f64,
    u: f64,
    v: f64,
}

pub fn read_snapshots(path: &Path) -> Result<Vec<Snapshot>, IoError> {
    let mut rdr = reader(path)?;
    let mut header = SNAPSHOT_COLUMNS.to_vec();
    header.push("v");
    check_header(path, &mut rdr, &header)?;
    let mut out: Vec<Snapshot> = Vec::new();
    let mut last_key = None;
    for row in rdr.deserialize() {
        let r: SnapshotRow = row.map_err(|e| csv_err(path, e))?;
        let kind = match (r.kind.as_str(), r.level, r.lag) {
            ("initial", ..) => SnapshotKind::Initial,
            ("stride", ..) => SnapshotKind::Stride,
            ("final", ..) => SnapshotKind::Final,
            ("doubling", Some(level), Some(lag)) => SnapshotKind::Doubling { level, lag },
            _ => {
                return Err(IoError::Csv {
                    path: path.display().to_string(),
                    message: format!("bad snapshot kind `{}`", r.kind),
                })
            }
        };
        let key = (r.step, kind);
        if last_key != Some(key) {
            out.push(Snapshot {
                step: r.step,
                kind,
                m_u: r.m_u,
                m_v: r.m_v,
                state: FieldState {
                    t: r.t,
                    u: Vec::new(),
                    v: Vec::new(),
                },
            });
            last_key = Some(key);
        }
        let s = out.last_mut().expect("pushed above");
        s.state.u.push(r.u);
        s.state.v.push(r.v);
    }
    Ok(out)
}
