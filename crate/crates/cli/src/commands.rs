use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use blowlab::io::{self, Curve, RunConfig, RunManifest};
use blowlab::model::{check_theorem_hypotheses, compute_exponents};
use blowlab::pipeline::{
    self, all_pass, blowup_set_check, doubling_check, fit_check, manifest_for, ode_oracle,
    ratio_check, rescale_verify, run_sweep, simulate, summarize, transform_check, write_phase,
    write_run, PipelineError, PriorRun, Thresholds, VaryAxis, Verdict, Via,
};
use blowlab::Resolved;

use crate::{
    out, BlowupSetArgs, Command, ConfigArgs, FitArgs, OdeArgs, PriorArgs, RescaleArgs, RunArgs,
    SweepArgs, TransformArgs, ViaArg, EXIT_HYPOTHESES, EXIT_USAGE, EXIT_VERDICT,
};

/// Failed analyses mean no verdict could be reached, which counts as a
/// failed verdict. Everything else is a usage or input problem.
pub fn exit_code_of(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<PipelineError>() {
        Some(PipelineError::Analysis(_)) => EXIT_VERDICT,
        _ => EXIT_USAGE,
    }
}

pub fn dispatch(command: &Command, json: bool) -> Result<u8> {
    match command {
        Command::Check(a) => check(a, json),
        Command::Run(a) => run(a, json),
        Command::Fit(a) => fit(a, json),
        Command::Doubling(a) => doubling(a, json),
        Command::Ratio(a) => ratio(a, json),
        Command::RescaleVerify(a) => rescale(a, json),
        Command::OracleOde(a) => oracle_ode(a, json),
        Command::OracleTransform(a) => oracle_transform(a, json),
        Command::BlowupSet(a) => blowup_set(a, json),
        Command::Sweep(a) => sweep(a, json),
    }
}

fn split_pair<'a>(s: &'a str, flag: &str) -> Result<(&'a str, f64)> {
    let (k, v) = s.split_once('=').ok_or_else(|| {
        anyhow!(PipelineError::Unsupported(format!(
            "{flag} `{s}`: expected NAME=VALUE"
        )))
    })?;
    let v = v.trim().parse::<f64>().map_err(|_| {
        anyhow!(PipelineError::Unsupported(format!(
            "{flag} `{s}`: value is not a number"
        )))
    })?;
    Ok((k.trim(), v))
}

fn load_config(a: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = pipeline::load_config(&a.config)?;
    for s in &a.sets {
        let (k, v) = split_pair(s, "--set")?;
        cfg.set(k, v).map_err(PipelineError::from)?;
    }
    Ok(cfg)
}

fn thresholds(list: &[String]) -> Result<Thresholds> {
    let mut t = Thresholds::default();
    for s in list {
        let (k, v) = split_pair(s, "--threshold")?;
        t.set(k, v)?;
    }
    Ok(t)
}

fn require_out(out: &Option<PathBuf>, command: &str) -> Result<PathBuf> {
    out.clone().ok_or_else(|| {
        anyhow!(PipelineError::Unsupported(format!(
            "{command} needs --out DIR"
        )))
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Manifest for a command that works on a configuration rather than a
/// prior run.
fn config_manifest(
    command: &str,
    options: &impl Serialize,
    resolved: &Resolved,
    wall: f64,
) -> Result<RunManifest> {
    let exps = compute_exponents(&resolved.params).map_err(PipelineError::from)?;
    let hyp = check_theorem_hypotheses(&resolved.params).map_err(PipelineError::from)?;
    Ok(manifest_for(
        command,
        serde_json::to_value(options)?,
        &resolved.echo,
        &exps,
        &hyp,
        None,
        None,
        wall,
    ))
}

fn prior_manifest(
    command: &str,
    options: &impl Serialize,
    prior: &PriorRun,
    wall: f64,
) -> Result<RunManifest> {
    let mut m = prior.manifest.clone();
    m.command = command.to_string();
    m.options = serde_json::to_value(options)?;
    m.wall_seconds = wall;
    m.tool_version = io::TOOL_VERSION.to_string();
    Ok(m)
}

fn write_manifest(dir: &Path, command: &str, m: &RunManifest) -> Result<()> {
    m.write(&dir.join(format!("{command}.manifest.json")))?;
    Ok(())
}

/// Prints the summary and verdict lines (or one JSON object) and returns
/// the exit status.
fn finish(
    command: &str,
    json: bool,
    summary: &[String],
    verdicts: &[Verdict],
    details: impl Serialize,
) -> Result<u8> {
    let pass = all_pass(verdicts);
    if json {
        let out = serde_json::json!({
            "command": command,
            "pass": pass,
            "summary": summary,
            "verdicts": verdicts,
            "details": details,
        });
        out!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        for line in summary {
            out!("{line}");
        }
        for v in verdicts {
            out!("{}", v.line);
        }
    }
    Ok(if pass { 0 } else { EXIT_VERDICT })
}

fn check(a: &ConfigArgs, json: bool) -> Result<u8> {
    let cfg = load_config(a)?;
    let resolved = cfg.resolve().map_err(PipelineError::from)?;
    let exps = compute_exponents(&resolved.params).map_err(PipelineError::from)?;
    let hyp = check_theorem_hypotheses(&resolved.params).map_err(PipelineError::from)?;
    let p = &resolved.params;
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write_manifest(dir, "check", &config_manifest("check", a, &resolved, 0.0)?)?;
    }
    if json {
        let out = serde_json::json!({
            "command": "check",
            "holds": hyp.holds(),
            "exponents": exps,
            "hypothesis_report": hyp,
        });
        out!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        out!(
            "exponents: α = {}, β = {}, θ1 = {}, θ2 = {}, μ1 = {}, μ2 = {}",
            exps.alpha,
            exps.beta,
            exps.theta1,
            exps.theta2,
            exps.mu1,
            exps.mu2
        );
        out!(
            "max{{α,β}} ≥ n/2 with n = {}: {} (margin {:.6})",
            p.n,
            hyp.cond_fujita,
            hyp.fujita_margin
        );
        out!(
            "q1 = {} < {:.6} and q2 = {} < {:.6}: {} (margins {:.6}, {:.6})",
            p.q1,
            exps.q1_bound,
            p.q2,
            exps.q2_bound,
            hyp.cond_q,
            hyp.q1_margin,
            hyp.q2_margin
        );
        out!(
            "check: rate hypotheses {}",
            if hyp.holds() { "hold" } else { "fail" }
        );
    }
    Ok(if hyp.holds() { 0 } else { EXIT_HYPOTHESES })
}

fn fit_phrase(summary: &pipeline::RunSummary) -> String {
    let Some(est) = summary.estimate else {
        return format!(
            "no blow-up time estimate ({})",
            summary.estimate_error.as_deref().unwrap_or("unknown")
        );
    };
    let mut s = format!("T_est {:.6}", est.t_est);
    for f in &summary.fits {
        if matches!(
            f.channel,
            blowlab::analysis::Channel::MU | blowlab::analysis::Channel::MV
        ) {
            s.push_str(&format!(
                ", {} exponent {:.3} vs {:.3} ({:.1}%)",
                f.channel,
                f.exponent,
                f.predicted_exponent,
                100.0 * f.rel_error()
            ));
        }
    }
    s
}

fn run(a: &RunArgs, json: bool) -> Result<u8> {
    let dir = require_out(&a.base.out, "run")?;
    let cfg = load_config(&a.base)?;
    let out = simulate(&cfg)?;
    let summary = summarize(&out.result.series, &out.exps, out.resolved.fit);
    write_run(&dir, &out, &summary, !a.no_svg)?;
    let t_end = out.result.series.t.last().copied().unwrap_or(0.0);
    let line = format!(
        "run: stopped ({}) after {} steps at t = {t_end:.6}; {}; wrote {}",
        out.result.stop_reason,
        out.result.steps_taken,
        fit_phrase(&summary),
        dir.display()
    );
    finish("run", json, &[line], &[], &summary)
}

fn load_prior(a: &PriorArgs) -> Result<PriorRun> {
    Ok(PriorRun::load(&a.out)?)
}

fn fit(a: &FitArgs, json: bool) -> Result<u8> {
    let start = Instant::now();
    let th = thresholds(&a.prior.thresholds)?;
    let mut prior = load_prior(&a.prior)?;
    let mut echo = prior.manifest.config_echo.clone();
    if let Some(lo) = a.window_lo {
        echo.set("fit.window_lo", lo).map_err(PipelineError::from)?;
    }
    if let Some(hi) = a.window_hi {
        echo.set("fit.window_hi", hi).map_err(PipelineError::from)?;
    }
    prior.resolved = echo.resolve().map_err(PipelineError::from)?;
    let out = fit_check(
        &prior.series,
        &prior.manifest.exponents,
        prior.resolved.fit,
        &th,
    )?;
    let dir = &a.prior.out;
    io::write_fits(&dir.join("fit.csv"), &out.summary.fits)?;
    io::write_svg(
        &dir.join("fit.svg"),
        &pipeline::series_svg(&prior.series, &out.summary),
    )?;
    let mut m = prior_manifest("fit", a, &prior, start.elapsed().as_secs_f64())?;
    m.config_echo = echo;
    m.t_est = out.summary.estimate.map(|e| e.t_est);
    m.fits = out.summary.fits.clone();
    write_manifest(dir, "fit", &m)?;
    let summary = vec![format!("fit: {}", fit_phrase(&out.summary))];
    finish("fit", json, &summary, &out.verdicts, &out)
}

fn doubling(a: &PriorArgs, json: bool) -> Result<u8> {
    let start = Instant::now();
    let th = thresholds(&a.thresholds)?;
    let prior = load_prior(a)?;
    let alpha = prior.manifest.exponents.alpha;
    let out = doubling_check(
        &prior.series,
        alpha,
        th.doubling_ratio_tol,
        th.doubling_tail as usize,
    )?;
    io::write_doubling(&a.out.join("doubling.csv"), &out.report)?;
    write_manifest(
        &a.out,
        "doubling",
        &prior_manifest("doubling", a, &prior, start.elapsed().as_secs_f64())?,
    )?;
    finish("doubling", json, &[], &out.verdicts, &out)
}

fn ratio(a: &PriorArgs, json: bool) -> Result<u8> {
    let start = Instant::now();
    let th = thresholds(&a.thresholds)?;
    let prior = load_prior(a)?;
    let out = ratio_check(
        &prior.series,
        &prior.resolved.params,
        &prior.manifest.exponents,
        &th,
    )?;
    let rows: Vec<Vec<String>> = out
        .trace
        .t
        .iter()
        .zip(&out.trace.phi)
        .map(|(t, phi)| vec![io::real(*t), io::real(*phi)])
        .collect();
    io::write_table(&a.out.join("ratio.csv"), &["t", "phi"], &rows)?;
    let tau: Vec<f64> = out.trace.t.iter().map(|t| out.t_est - t).collect();
    let svg = io::loglog_svg(
        "Φ = M_u^(-1/2α)·M_v^(1/2β)",
        "T_est - t",
        "Φ",
        &[Curve::new("Φ", tau, out.trace.phi.clone())],
    );
    io::write_svg(&a.out.join("ratio.svg"), &svg)?;
    write_manifest(
        &a.out,
        "ratio",
        &prior_manifest("ratio", a, &prior, start.elapsed().as_secs_f64())?,
    )?;
    finish("ratio", json, &[], &out.verdicts, &out)
}

fn rescale(a: &RescaleArgs, json: bool) -> Result<u8> {
    let start = Instant::now();
    let th = thresholds(&a.prior.thresholds)?;
    let prior = load_prior(&a.prior)?;
    let snaps = prior.snapshots(&a.prior.out)?;
    let nodes = prior.resolved.grid.len();
    let coarse = if a.no_coarse {
        None
    } else {
        let mut echo = prior.manifest.config_echo.clone();
        echo.grid.nodes = (nodes - 1) / 2 + 1;
        Some(simulate(&echo)?)
    };
    let coarse_view = coarse.as_ref().map(|c| {
        (
            c.result.snapshots.as_slice(),
            &c.result.series,
            &c.resolved.grid,
        )
    });
    let out = rescale_verify(
        (&snaps, &prior.series, &prior.resolved.grid),
        coarse_view,
        &prior.resolved.params,
        &prior.manifest.exponents,
        a.levels,
        &th,
    )?;
    let opt = |x: Option<f64>| x.map(io::real).unwrap_or_default();
    let rows: Vec<Vec<String>> = out
        .levels
        .iter()
        .map(|l| {
            vec![
                l.level.to_string(),
                io::real(l.t0),
                io::real(l.gamma),
                io::real(l.sup),
                io::real(l.center),
                l.relaxed.to_string(),
                io::real(l.res1),
                io::real(l.res2),
                io::real(l.share1),
                io::real(l.share2),
                opt(l.coarse_res1),
                opt(l.coarse_res2),
            ]
        })
        .collect();
    io::write_table(
        &a.prior.out.join("rescale.csv"),
        &[
            "level",
            "t0",
            "gamma",
            "sup",
            "center",
            "relaxed",
            "res1",
            "res2",
            "share1",
            "share2",
            "coarse_res1",
            "coarse_res2",
        ],
        &rows,
    )?;
    let m = prior_manifest("rescale-verify", a, &prior, start.elapsed().as_secs_f64())?;
    write_manifest(&a.prior.out, "rescale-verify", &m)?;
    let summary: Vec<String> = out
        .skipped
        .iter()
        .map(|(l, why)| format!("rescale: level {l} skipped: {why}"))
        .collect();
    finish("rescale-verify", json, &summary, &out.verdicts, &out)
}

fn oracle_ode(a: &OdeArgs, json: bool) -> Result<u8> {
    let start = Instant::now();
    let th = thresholds(&a.base.thresholds)?;
    let mut cfg = load_config(&a.base)?;
    cfg.set("time.reaction_cap", a.reaction_cap)
        .map_err(PipelineError::from)?;
    let resolved = cfg.resolve().map_err(PipelineError::from)?;
    let out = ode_oracle(&resolved, &th)?;
    if let Some(dir) = &a.base.out {
        ensure_dir(dir)?;
        io::write_series(&dir.join("series.csv"), &out.run.series)?;
        io::write_doubling(&dir.join("doubling.csv"), &out.doubling.report)?;
        let mut m = config_manifest("oracle-ode", a, &resolved, start.elapsed().as_secs_f64())?;
        m.stop_reason = Some(out.run.stop_reason);
        m.t_est = Some(out.estimate.t_est);
        m.fits = vec![out.fit];
        write_manifest(dir, "oracle-ode", &m)?;
    }
    finish("oracle-ode", json, &[], &out.verdicts, &out)
}

fn oracle_transform(a: &TransformArgs, json: bool) -> Result<u8> {
    let start = Instant::now();
    let th = thresholds(&a.base.thresholds)?;
    let resolved = load_config(&a.base)?
        .resolve()
        .map_err(PipelineError::from)?;
    let out = transform_check(&resolved, a.u_cap, a.check_every, &th)?;
    if let Some(dir) = &a.base.out {
        ensure_dir(dir)?;
        let row = |n: usize, c: &blowlab::solver::TransformComparison| {
            vec![
                n.to_string(),
                io::real(c.sup_diff),
                io::real(c.t_end),
                io::real(c.max_u),
                c.checks.to_string(),
            ]
        };
        io::write_table(
            &dir.join("transform.csv"),
            &["nodes", "sup_diff", "t_end", "max_u", "checks"],
            &[
                row(out.coarse_nodes, &out.coarse),
                row(out.nodes, &out.fine),
            ],
        )?;
        let m = config_manifest(
            "oracle-transform",
            a,
            &resolved,
            start.elapsed().as_secs_f64(),
        )?;
        write_manifest(dir, "oracle-transform", &m)?;
    }
    finish("oracle-transform", json, &[], &out.verdicts, &out)
}

fn blowup_set(a: &BlowupSetArgs, json: bool) -> Result<u8> {
    let start = Instant::now();
    let th = thresholds(&a.base.thresholds)?;
    let resolved = load_config(&a.base)?
        .resolve()
        .map_err(PipelineError::from)?;
    let via = match a.via {
        ViaArg::Direct => Via::Direct,
        ViaArg::Transform => Via::Transform,
    };
    let out = blowup_set_check(&resolved, via, a.u_stop, &th)?;
    if let Some(dir) = &a.base.out {
        ensure_dir(dir)?;
        let rows: Vec<Vec<String>> = (0..out.report.t.len())
            .map(|k| {
                vec![
                    io::real(out.report.t[k]),
                    io::real(out.report.width[k]),
                    io::real(out.report.max_u[k]),
                ]
            })
            .collect();
        io::write_table(&dir.join("blowup_set.csv"), &["t", "width", "max_u"], &rows)?;
        let mut m = config_manifest("blowup-set", a, &resolved, start.elapsed().as_secs_f64())?;
        m.stop_reason = Some(out.stop_reason);
        write_manifest(dir, "blowup-set", &m)?;
    }
    finish("blowup-set", json, &[], &out.verdicts, &out)
}

fn sweep(a: &SweepArgs, json: bool) -> Result<u8> {
    let start = Instant::now();
    let dir = require_out(&a.base.out, "sweep")?;
    let cfg = load_config(&a.base)?;
    let resolved = cfg.resolve().map_err(PipelineError::from)?;
    let axes: Vec<VaryAxis> = a
        .vary
        .iter()
        .map(|s| VaryAxis::parse(s))
        .collect::<Result<_, _>>()?;
    if axes.len() > 2 {
        bail!(PipelineError::Unsupported(format!(
            "sweep takes one or two --vary axes, got {}",
            axes.len()
        )));
    }
    ensure_dir(&dir)?;
    let cells = run_sweep(&cfg, &axes, a.jobs, Some(&dir))?;
    write_phase(&dir.join("phase.csv"), &axes, &cells)?;
    write_manifest(
        &dir,
        "sweep",
        &config_manifest("sweep", a, &resolved, start.elapsed().as_secs_f64())?,
    )?;
    let faults = cells.iter().filter(|c| c.fault.is_some()).count();
    let line = format!(
        "sweep: {} cells, {faults} with faults; wrote {}",
        cells.len(),
        dir.join("phase.csv").display()
    );
    finish("sweep", json, &[line], &[], &cells)
}
