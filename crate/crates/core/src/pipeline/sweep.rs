use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{ensure_dir, manifest_for, simulate, summarize, PipelineError};
use crate::analysis::Channel;
use crate::io::{self, RunConfig};
use crate::model::{check_theorem_hypotheses, compute_exponents};
use crate::solver::StopReason;

/// One swept key with its inclusive value range, parsed from
/// `key=lo:hi:step`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VaryAxis {
    pub key: String,
    pub values: Vec<f64>,
}

impl VaryAxis {
    pub fn parse(spec: &str) -> Result<Self, PipelineError> {
        let bad = |why: &str| PipelineError::Unsupported(format!("--vary `{spec}`: {why}"));
        let (key, range) = spec
            .split_once('=')
            .ok_or_else(|| bad("expected key=lo:hi:step"))?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bounds and step must be numbers"))?;
        let [lo, hi, step] = parts[..] else {
            return Err(bad("expected key=lo:hi:step"));
        };
        if !(step > 0.0 && step.is_finite() && lo.is_finite() && hi.is_finite()) {
            return Err(bad("step must be positive and bounds finite"));
        }
        if hi < lo {
            return Err(bad("empty range"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        let values = (0..count).map(|k| lo + k as f64 * step).collect();
        // Reject unknown keys up front rather than once per cell.
        RunConfig::with_powers(2.0, 2.0, 1.5, 1.5).set(key.trim(), 1.0)?;
        Ok(VaryAxis {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Result of one sweep cell. `fault` holds the error of a cell whose
/// configuration was invalid or whose run or fit failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub values: Vec<f64>,
    pub cond_fujita: Option<bool>,
    pub cond_q: Option<bool>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub stop_reason: Option<StopReason>,
    pub t_est: Option<f64>,
    pub mu: Option<(f64, f64)>,
    pub mv: Option<(f64, f64)>,
    pub fault: Option<String>,
}

/// Trailing columns of `phase.csv`; the swept keys come first.
pub const PHASE_COLUMNS: [&str; 11] = [
    "cond_fujita",
    "cond_q",
    "alpha",
    "beta",
    "stop_reason",
    "T_est",
    "M_u_exponent",
    "M_u_rel_error",
    "M_v_exponent",
    "M_v_rel_error",
    "fault",
];

fn run_cell(base: &RunConfig, axes: &[VaryAxis], values: &[f64], dir: Option<&Path>) -> SweepCell {
    let mut cell = SweepCell {
        values: values.to_vec(),
        cond_fujita: None,
        cond_q: None,
        alpha: None,
        beta: None,
        stop_reason: None,
        t_est: None,
        mu: None,
        mv: None,
        fault: None,
    };
    if let Err(e) = fill_cell(&mut cell, base, axes, dir) {
        cell.fault = Some(e.to_string());
    }
    cell
}

fn fill_cell(
    cell: &mut SweepCell,
    base: &RunConfig,
    axes: &[VaryAxis],
    dir: Option<&Path>,
) -> Result<(), PipelineError> {
    let mut cfg = base.clone();
    for (axis, v) in axes.iter().zip(&cell.values) {
        cfg.set(&axis.key, *v)?;
    }
    let resolved = cfg.resolve()?;
    let exps = compute_exponents(&resolved.params)?;
    let hyp = check_theorem_hypotheses(&resolved.params)?;
    cell.cond_fujita = Some(hyp.cond_fujita);
    cell.cond_q = Some(hyp.cond_q);
    cell.alpha = Some(exps.alpha);
    cell.beta = Some(exps.beta);
    let run = simulate(&cfg)?;
    cell.stop_reason = Some(run.result.stop_reason);
    let summary = summarize(&run.result.series, &run.exps, run.resolved.fit);
    cell.t_est = summary.estimate.map(|e| e.t_est);
    let fit_of = |c: Channel| {
        summary
            .fits
            .iter()
            .find(|f| f.channel == c)
            .map(|f| (f.exponent, f.rel_error()))
    };
    cell.mu = fit_of(Channel::MU);
    cell.mv = fit_of(Channel::MV);
    if let Some(dir) = dir {
        ensure_dir(dir)?;
        io::write_series(&dir.join("series.csv"), &run.result.series)?;
        io::write_fits(&dir.join("fit.csv"), &summary.fits)?;
        manifest_for(
            "sweep",
            serde_json::json!({ "cell": cell.values }),
            &cfg,
            &run.exps,
            &run.hyp,
            Some(&run.result),
            Some(&summary),
            run.wall_seconds,
        )
        .write(&dir.join("manifest.json"))?;
    }
    if let Some(e) = &summary.estimate_error {
        return Err(PipelineError::Unsupported(format!("no blow-up time: {e}")));
    }
    Ok(())
}

/// Runs every grid point of the one- or two-axis sweep on `jobs` threads.
///
/// Cells come back in row-major order of the axes regardless of `jobs`.
/// With `out`, each cell also writes `cell_KKKK/` with its series, fits and
/// manifest.
pub fn run_sweep(
    base: &RunConfig,
    axes: &[VaryAxis],
    jobs: usize,
    out: Option<&Path>,
) -> Result<Vec<SweepCell>, PipelineError> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(PipelineError::Unsupported(format!(
            "sweep takes one or two --vary axes, got {}",
            axes.len()
        )));
    }
    let points: Vec<Vec<f64>> = match axes {
        [a] => a.values.iter().map(|v| vec![*v]).collect(),
        [a, b] => a
            .values
            .iter()
            .flat_map(|x| b.values.iter().map(move |y| vec![*x, *y]))
            .collect(),
        _ => unreachable!(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Unsupported(format!("thread pool: {e}")))?;
    let cells = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, values)| {
                let dir = out.map(|o| o.join(format!("cell_{k:04}")));
                run_cell(base, axes, values, dir.as_deref())
            })
            .collect()
    });
    Ok(cells)
}

/// Writes `phase.csv`: one row per cell, sorted by the swept values.
pub fn write_phase(
    path: &Path,
    axes: &[VaryAxis],
    cells: &[SweepCell],
) -> Result<(), PipelineError> {
    let mut header: Vec<&str> = axes.iter().map(|a| a.key.as_str()).collect();
    header.extend(PHASE_COLUMNS);
    let mut sorted: Vec<&SweepCell> = cells.iter().collect();
    sorted.sort_by(|a, b| {
        a.values
            .partial_cmp(&b.values)
            .expect("finite sweep values")
    });
    let opt = |x: Option<f64>| x.map(io::real).unwrap_or_default();
    let flag = |x: Option<bool>| x.map(|b| b.to_string()).unwrap_or_default();
    let rows: Vec<Vec<String>> = sorted
        .iter()
        .map(|c| {
            let mut row: Vec<String> = c.values.iter().map(|v| io::real(*v)).collect();
            row.extend([
                flag(c.cond_fujita),
                flag(c.cond_q),
                opt(c.alpha),
                opt(c.beta),
                c.stop_reason.map(|s| s.to_string()).unwrap_or_default(),
                opt(c.t_est),
                opt(c.mu.map(|m| m.0)),
                opt(c.mu.map(|m| m.1)),
                opt(c.mv.map(|m| m.0)),
                opt(c.mv.map(|m| m.1)),
                c.fault.clone().unwrap_or_default(),
            ]);
            row
        })
        .collect();
    io::write_table(path, &header, &rows)?;
    Ok(())
}
