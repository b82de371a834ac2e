//! End-to-end commands: simulate, analyse, judge against the verdict
//! thresholds and write the run directory.
//!
//! Every command produces structured outcomes plus a list of [`Verdict`]s;
//! the command line front-end only formats them.

mod checks;
mod sweep;
mod thresholds;

pub use checks::{
    blowup_set_check, doubling_check, fit_check, ode_oracle, ratio_check, rescale_verify,
    transform_check, BlowupSetOutcome, DoublingOutcome, FitOutcome, LevelCheck, OdeOutcome,
    RatioOutcome, RescaleOutcome, TransformOutcome, Via,
};
pub use sweep::{run_sweep, write_phase, SweepCell, VaryAxis, PHASE_COLUMNS};
pub use thresholds::{Thresholds, THRESHOLD_TABLE};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{fit_rate, AnalysisError, BlowupEstimate, Channel, RateFit};
use crate::io::{self, IoError, Resolved, RunConfig, RunManifest};
use crate::model::{
    check_theorem_hypotheses, compute_exponents, Exponents, HypothesisReport, ModelError,
};
use crate::solver::{run_to_blowup, RunResult, Snapshot, SolverError, SupNormSeries};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(
        "no prior run in {0}: expected manifest.json, series.csv and snapshots.csv from `run`"
    )]
    MissingRun(PathBuf),
    #[error("{0}")]
    Unsupported(String),
}

/// One pass/fail judgement with its human-readable line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub pass: bool,
    pub line: String,
}

impl Verdict {
    pub fn new(check: &str, pass: bool, detail: impl std::fmt::Display) -> Self {
        let tag = if pass { "PASS" } else { "FAIL" };
        Verdict {
            check: check.to_string(),
            pass,
            line: format!("{check}: {detail} {tag}"),
        }
    }

    /// Like [`Verdict::new`] with the tolerance appended, as in `PASS@15%`.
    pub fn at(
        check: &str,
        pass: bool,
        detail: impl std::fmt::Display,
        tol: impl std::fmt::Display,
    ) -> Self {
        let tag = if pass { "PASS" } else { "FAIL" };
        Verdict {
            check: check.to_string(),
            pass,
            line: format!("{check}: {detail} {tag}@{tol}"),
        }
    }
}

pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.pass)
}

/// Percent with up to three significant decimals, e.g. `15%` or `0.1%`.
pub(crate) fn percent(x: f64) -> String {
    let s = format!("{:.3}", 100.0 * x);
    format!("{}%", s.trim_end_matches('0').trim_end_matches('.'))
}

/// A finished simulation with the inputs that produced it.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub resolved: Resolved,
    pub exps: Exponents,
    pub hyp: HypothesisReport,
    pub result: RunResult,
    pub wall_seconds: f64,
}

/// Loads a TOML configuration, or the configuration echoed in a manifest
/// when the path ends in `.json`.
pub fn load_config(path: &Path) -> Result<RunConfig, PipelineError> {
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(RunManifest::read(path)?.config_echo);
    }
    let text = std::fs::read_to_string(path).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(RunConfig::from_toml(&text)?)
}

/// Runs the coupled system for a configuration.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutput, PipelineError> {
    let resolved = cfg.resolve()?;
    let exps = compute_exponents(&resolved.params)?;
    let hyp = check_theorem_hypotheses(&resolved.params)?;
    let start = Instant::now();
    let result = run_to_blowup(&resolved.params, &exps, &resolved.grid, &resolved.solver)?;
    Ok(RunOutput {
        resolved,
        exps,
        hyp,
        result,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Blow-up time and the rate fits of every channel that can be fitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub estimate: Option<BlowupEstimate>,
    pub estimate_error: Option<String>,
    pub fits: Vec<RateFit>,
    /// Channels that could not be fitted, with the reason.
    pub skipped: Vec<(Channel, String)>,
}

pub fn summarize(
    series: &SupNormSeries,
    exps: &Exponents,
    window: crate::analysis::FitWindow,
) -> RunSummary {
    let mut out = RunSummary::default();
    match crate::analysis::estimate_blowup_time(series, exps.alpha) {
        Ok(est) => {
            for c in Channel::ALL {
                match fit_rate(series, est.t_est, c, exps, window) {
                    Ok(f) => out.fits.push(f),
                    Err(e) => out.skipped.push((c, e.to_string())),
                }
            }
            out.estimate = Some(est);
        }
        Err(e) => out.estimate_error = Some(e.to_string()),
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn manifest_for(
    command: &str,
    options: serde_json::Value,
    echo: &RunConfig,
    exps: &Exponents,
    hyp: &HypothesisReport,
    result: Option<&RunResult>,
    summary: Option<&RunSummary>,
    wall_seconds: f64,
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        options,
        config_echo: echo.clone(),
        exponents: *exps,
        hypothesis_report: *hyp,
        stop_reason: result.map(|r| r.stop_reason),
        t_est: summary.and_then(|s| s.estimate.map(|e| e.t_est)),
        fits: summary.map(|s| s.fits.clone()).unwrap_or_default(),
        tool_version: io::TOOL_VERSION.to_string(),
        wall_seconds,
    }
}

/// Writes `series.csv`, `snapshots.csv`, `fit.csv`, `series.svg` and
/// `manifest.json` for a run.
pub fn write_run(
    dir: &Path,
    run: &RunOutput,
    summary: &RunSummary,
    svg: bool,
) -> Result<(), PipelineError> {
    ensure_dir(dir)?;
    io::write_series(&dir.join("series.csv"), &run.result.series)?;
    io::write_snapshots(
        &dir.join("snapshots.csv"),
        &run.result.snapshots,
        &run.resolved.grid,
    )?;
    io::write_fits(&dir.join("fit.csv"), &summary.fits)?;
    if svg {
        io::write_svg(
            &dir.join("series.svg"),
            &series_svg(&run.result.series, summary),
        )?;
    }
    manifest_for(
        "run",
        serde_json::json!({ "svg": svg }),
        &run.resolved.echo,
        &run.exps,
        &run.hyp,
        Some(&run.result),
        Some(summary),
        run.wall_seconds,
    )
    .write(&dir.join("manifest.json"))?;
    Ok(())
}

/// `M_u` and `M_v` against `T_est − t`, with the fitted power laws.
pub fn series_svg(series: &SupNormSeries, summary: &RunSummary) -> String {
    let Some(est) = summary.estimate else {
        let curves = [
            io::Curve::new("M_u", series.t.clone(), series.m_u.clone()),
            io::Curve::new("M_v", series.t.clone(), series.m_v.clone()),
        ];
        return io::loglog_svg("sup-functionals", "t", "M", &curves);
    };
    let tau: Vec<f64> = series.t.iter().map(|t| est.t_est - t).collect();
    let mut curves = vec![
        io::Curve::new("M_u", tau.clone(), series.m_u.clone()),
        io::Curve::new("M_v", tau, series.m_v.clone()),
    ];
    for f in summary
        .fits
        .iter()
        .filter(|f| matches!(f.channel, Channel::MU | Channel::MV))
    {
        curves.push(io::Curve::power_law(
            format!("{} fit, exponent {:.3}", f.channel, f.exponent),
            f.amplitude,
            f.exponent,
            f.window.0,
            f.window.1,
        ));
    }
    io::loglog_svg("sup-functionals near blow-up", "T_est - t", "M", &curves)
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| {
        PipelineError::Io(IoError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })
    })
}

/// A run directory written by [`write_run`].
#[derive(Debug, Clone)]
pub struct PriorRun {
    pub manifest: RunManifest,
    pub resolved: Resolved,
    pub series: SupNormSeries,
}

impl PriorRun {
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let manifest_path = dir.join("manifest.json");
        if !manifest_path.exists() || !dir.join("series.csv").exists() {
            return Err(PipelineError::MissingRun(dir.to_path_buf()));
        }
        let manifest = RunManifest::read(&manifest_path)?;
        let resolved = manifest.config_echo.resolve()?;
        let series = io::read_series(&dir.join("series.csv"))?;
        Ok(PriorRun {
            manifest,
            resolved,
            series,
        })
    }

    pub fn snapshots(&self, dir: &Path) -> Result<Vec<Snapshot>, PipelineError> {
        let path = dir.join("snapshots.csv");
        if !path.exists() {
            return Err(PipelineError::MissingRun(dir.to_path_buf()));
        }
        Ok(io::read_snapshots(&path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_lines() {
        let v = Verdict::at(
            "fit",
            true,
            "exponent 0.612 vs α 0.600, rel err 2.0%",
            percent(0.15),
        );
        assert_eq!(
            v.line,
            "fit: exponent 0.612 vs α 0.600, rel err 2.0% PASS@15%"
        );
        assert!(!Verdict::new("ratio", false, "spread 12").pass);
        assert_eq!(percent(0.02), "2%");
        assert_eq!(percent(0.001), "0.1%");
        assert_eq!(percent(0.125), "12.5%");
    }

    #[test]
    fn quick_run_writes_a_loadable_directory() {
        let mut cfg = RunConfig::with_powers(2.0, 3.0, 1.2, 1.2);
        cfg.grid.nodes = 101;
        cfg.time.m_stop = 1e4;
        let run = simulate(&cfg).unwrap();
        let summary = summarize(&run.result.series, &run.exps, run.resolved.fit);
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &run, &summary, true).unwrap();
        let prior = PriorRun::load(dir.path()).unwrap();
        assert_eq!(prior.series, run.result.series);
        assert_eq!(prior.snapshots(dir.path()).unwrap(), run.result.snapshots);
        assert_eq!(prior.manifest.config_echo, run.resolved.echo);
        assert!(dir.path().join("series.svg").exists());
        let replay = simulate(&load_config(&dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(replay.result, run.result);
    }

    #[test]
    fn missing_run_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            PriorRun::load(dir.path()),
            Err(PipelineError::MissingRun(_))
        ));
    }
}
