use serde::Serialize;

use super::{percent, summarize, PipelineError, RunSummary, Thresholds, Verdict};
use crate::analysis::{
    blowup_set_width, build_rescaled_frame, doubling_analysis, doubling_frame_times,
    estimate_blowup_time, fit_rate, gradient_product_check, ratio_trace, rescaled_residual,
    BlowupEstimate, BlowupSetClass, BlowupSetReport, Channel, DoublingReport, FitWindow,
    FrameOptions, ProductCheck, RateFit, RatioTrace, SetThresholds,
};
use crate::grid::RadialGrid;
use crate::io::Resolved;
use crate::model::{compute_exponents, Exponents, SystemParams};
use crate::solver::{
    compare_with_transform, homogeneous_blowup_time, is_homogeneous, log1p_snapshots, run_scalar,
    run_to_blowup, transform_oracle, RunResult, Snapshot, SolverConfig, StopReason, SupNormSeries,
    TransformComparison, TRANSFORM_OVERFLOW,
};

#[derive(Debug, Clone, Serialize)]
pub struct FitOutcome {
    pub summary: RunSummary,
    pub products: Vec<ProductCheck>,
    pub verdicts: Vec<Verdict>,
}

fn exponent_verdict(check: &str, fit: &RateFit, symbol: &str, tol: f64) -> Verdict {
    Verdict::at(
        check,
        fit.rel_error() <= tol,
        format!(
            "{} exponent {:.3} vs {symbol} {:.3}, rel err {:.1}%",
            fit.channel,
            fit.exponent,
            fit.predicted_exponent,
            100.0 * fit.rel_error()
        ),
        percent(tol),
    )
}

/// Blow-up time, rate fits of all channels, and the verdicts on `M_u`,
/// `M_v` and the gradient-channel products.
pub fn fit_check(
    series: &SupNormSeries,
    exps: &Exponents,
    window: FitWindow,
    th: &Thresholds,
) -> Result<FitOutcome, PipelineError> {
    let est = estimate_blowup_time(series, exps.alpha)?;
    let summary = summarize(series, exps, window);
    let mut verdicts = Vec::new();
    for (channel, symbol) in [(Channel::MU, "α"), (Channel::MV, "β")] {
        match summary.fits.iter().find(|f| f.channel == channel) {
            Some(f) => verdicts.push(exponent_verdict("fit", f, symbol, th.exponent_tol)),
            None => {
                let why = summary
                    .skipped
                    .iter()
                    .find(|(c, _)| *c == channel)
                    .map_or("not fitted".to_string(), |(_, e)| e.clone());
                verdicts.push(Verdict::new("fit", false, format!("{channel}: {why}")));
            }
        }
    }
    let mut products = Vec::new();
    for channel in [Channel::GradU, Channel::GradV] {
        match gradient_product_check(series, est.t_est, channel, exps, window, th.product_factor) {
            Ok(p) => {
                verdicts.push(Verdict::at(
                    "product",
                    p.bounded,
                    format!(
                        "{channel}·(T−t)^rate within [{:.3}, {:.3}] around median {:.3}",
                        p.min / p.median,
                        p.max / p.median,
                        p.median
                    ),
                    format!("factor {}", th.product_factor),
                ));
                products.push(p);
            }
            Err(e) => verdicts.push(Verdict::new("product", false, format!("{channel}: {e}"))),
        }
    }
    Ok(FitOutcome {
        summary,
        products,
        verdicts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingOutcome {
    pub report: DoublingReport,
    pub tail_ratio: f64,
    pub diverging: bool,
    pub verdicts: Vec<Verdict>,
}

/// Doubling structure of `M_u`: bounded `D_j`, no divergence over the last
/// `tail` values, last-5 interval ratio within `tol` of `2^{-1/α}`.
pub fn doubling_check(
    series: &SupNormSeries,
    alpha: f64,
    tol: f64,
    tail: usize,
) -> Result<DoublingOutcome, PipelineError> {
    let report = doubling_analysis(series, alpha)?;
    let tail_ratio = report.tail_ratio(5);
    let diverging = report.diverging_tail(tail);
    let rel = (tail_ratio - report.predicted_ratio).abs() / report.predicted_ratio;
    let verdicts = vec![
        Verdict::new(
            "doubling",
            report.sup_d.is_finite(),
            format!(
                "sup D_j {:.4} over {} doublings",
                report.sup_d,
                report.d_j.len()
            ),
        ),
        Verdict::new(
            "doubling",
            !diverging,
            format!(
                "{} monotone divergence over the last {tail} D_j",
                if diverging { "found" } else { "no" }
            ),
        ),
        Verdict::at(
            "doubling",
            rel <= tol,
            format!(
                "last-5 ratio {tail_ratio:.4} vs 2^(-1/α) {:.4}, rel err {:.1}%",
                report.predicted_ratio,
                100.0 * rel
            ),
            percent(tol),
        ),
    ];
    Ok(DoublingOutcome {
        report,
        tail_ratio,
        diverging,
        verdicts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioOutcome {
    pub t_est: f64,
    pub symmetric: bool,
    pub trace: RatioTrace,
    pub verdicts: Vec<Verdict>,
}

/// `Φ = M_u^{-1/2α}·M_v^{1/2β}` over the second half of the run: identically
/// 1 for symmetric parameters, bounded spread otherwise.
pub fn ratio_check(
    series: &SupNormSeries,
    params: &SystemParams,
    exps: &Exponents,
    th: &Thresholds,
) -> Result<RatioOutcome, PipelineError> {
    let est = estimate_blowup_time(series, exps.alpha)?;
    let trace = ratio_trace(series, exps.alpha, exps.beta, est.t_est)?;
    let symmetric = params.is_symmetric();
    let verdict = if symmetric {
        let dev = trace
            .phi
            .iter()
            .map(|p| (p - 1.0).abs())
            .fold(0.0, f64::max);
        Verdict::at(
            "ratio",
            dev <= th.symmetric_phi_tol,
            format!("Φ ∈ [{},{}]", trace.phi_min, trace.phi_max),
            format!("{:e}", th.symmetric_phi_tol),
        )
    } else {
        Verdict::at(
            "ratio",
            trace.spread() <= th.ratio_spread,
            format!(
                "Φ ∈ [{:.4},{:.4}], phi_max/phi_min {:.3}",
                trace.phi_min,
                trace.phi_max,
                trace.spread()
            ),
            th.ratio_spread,
        )
    };
    Ok(RatioOutcome {
        t_est: est.t_est,
        symmetric,
        trace,
        verdicts: vec![verdict],
    })
}

/// Frame diagnostics at one doubling level.
#[derive(Debug, Clone, Serialize)]
pub struct LevelCheck {
    pub level: u32,
    pub t0: f64,
    pub gamma: f64,
    pub sup: f64,
    pub center: f64,
    pub relaxed: bool,
    pub res1: f64,
    pub res2: f64,
    pub share1: f64,
    pub share2: f64,
    pub coarse_res1: Option<f64>,
    pub coarse_res2: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RescaleOutcome {
    pub levels: Vec<LevelCheck>,
    /// Levels that could not be framed, with the reason.
    pub skipped: Vec<(u32, String)>,
    pub verdicts: Vec<Verdict>,
}

/// A run as seen by the rescaling verifier.
pub type RunView<'a> = (&'a [Snapshot], &'a SupNormSeries, &'a RadialGrid);

fn frame_at(
    view: RunView<'_>,
    level: u32,
    params: &SystemParams,
    exps: &Exponents,
) -> Result<
    (
        crate::analysis::RescaledFrame,
        crate::analysis::ResidualReport,
    ),
    PipelineError,
> {
    let (snaps, series, grid) = view;
    let t0 = doubling_frame_times(snaps)
        .into_iter()
        .find(|(l, _)| *l == level)
        .map(|(_, t)| t)
        .ok_or_else(|| {
            PipelineError::Unsupported(format!("no doubling snapshot at level {level}"))
        })?;
    let frame = build_rescaled_frame(
        snaps,
        series,
        t0,
        exps,
        grid,
        params.n,
        &FrameOptions::default(),
    )?;
    let res = rescaled_residual(&frame, params, exps)?;
    Ok((frame, res))
}

/// Rescaled frames at the first `levels` doubling levels that can be framed
/// on the run (and on the coarse companion run, when given).
pub fn rescale_verify(
    fine: RunView<'_>,
    coarse: Option<RunView<'_>>,
    params: &SystemParams,
    exps: &Exponents,
    levels: usize,
    th: &Thresholds,
) -> Result<RescaleOutcome, PipelineError> {
    let mut out = RescaleOutcome {
        levels: Vec::new(),
        skipped: Vec::new(),
        verdicts: Vec::new(),
    };
    for (level, t0) in doubling_frame_times(fine.0) {
        if out.levels.len() == levels {
            break;
        }
        let (frame, res) = match frame_at(fine, level, params, exps) {
            Ok(x) => x,
            Err(e) => {
                out.skipped.push((level, e.to_string()));
                continue;
            }
        };
        let coarse_res = match coarse.map(|c| frame_at(c, level, params, exps)) {
            None => None,
            Some(Ok((_, r))) => Some(r),
            Some(Err(e)) => {
                out.skipped.push((level, format!("coarse grid: {e}")));
                continue;
            }
        };
        out.levels.push(LevelCheck {
            level,
            t0,
            gamma: frame.gamma,
            sup: frame.sup_functional(),
            center: frame.center_value(),
            relaxed: frame.relaxed,
            res1: res.res1,
            res2: res.res2,
            share1: res.budget1.gradient_share(),
            share2: res.budget2.gradient_share(),
            coarse_res1: coarse_res.map(|r| r.res1),
            coarse_res2: coarse_res.map(|r| r.res2),
        });
    }
    out.verdicts.push(Verdict::new(
        "rescale",
        out.levels.len() >= levels,
        format!("{} of {levels} doubling levels framed", out.levels.len()),
    ));
    for l in &out.levels {
        out.verdicts.push(Verdict::new(
            "rescale",
            l.sup <= th.rescale_sup && l.center >= th.rescale_center,
            format!(
                "level {}: sup {:.4} ≤ {}, center {:.4} ≥ {}{}",
                l.level,
                l.sup,
                th.rescale_sup,
                l.center,
                th.rescale_center,
                if l.relaxed { " (relaxed)" } else { "" }
            ),
        ));
        if let (Some(c1), Some(c2)) = (l.coarse_res1, l.coarse_res2) {
            out.verdicts.push(Verdict::new(
                "rescale",
                l.res1 < c1 && l.res2 < c2,
                format!(
                    "level {}: residuals {:.3e}, {:.3e} vs coarse {c1:.3e}, {c2:.3e}",
                    l.level, l.res1, l.res2
                ),
            ));
        }
    }
    if out.levels.len() >= 2 {
        let decreasing =
            |f: fn(&LevelCheck) -> f64| out.levels.windows(2).all(|w| f(&w[1]) < f(&w[0]));
        let shares = |f: fn(&LevelCheck) -> f64| {
            out.levels
                .iter()
                .map(|l| format!("{:.4}", f(l)))
                .collect::<Vec<_>>()
                .join(" → ")
        };
        out.verdicts.push(Verdict::new(
            "rescale",
            decreasing(|l| l.share1) && decreasing(|l| l.share2),
            format!(
                "gradient share u: {}, v: {} decreasing",
                shares(|l| l.share1),
                shares(|l| l.share2)
            ),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct OdeOutcome {
    pub t_exact: f64,
    pub estimate: BlowupEstimate,
    pub fit: RateFit,
    pub doubling: DoublingOutcome,
    #[serde(skip)]
    pub run: RunResult,
    pub verdicts: Vec<Verdict>,
}

/// Homogeneous run against the closed-form blow-up time of
/// `u' = v^p1, v' = u^p2`.
pub fn ode_oracle(resolved: &Resolved, th: &Thresholds) -> Result<OdeOutcome, PipelineError> {
    let params = &resolved.params;
    if !is_homogeneous(params) {
        return Err(PipelineError::Unsupported(
            "oracle-ode needs domain.boundary = \"neumann\" and init.kind = \"constant\"".into(),
        ));
    }
    let exps = compute_exponents(params)?;
    let run = run_to_blowup(params, &exps, &resolved.grid, &resolved.solver)?;
    let t_exact = homogeneous_blowup_time(
        params.p1,
        params.p2,
        params.init.amplitude_u,
        params.init.amplitude_v,
    );
    let estimate = estimate_blowup_time(&run.series, exps.alpha)?;
    let fit = fit_rate(
        &run.series,
        estimate.t_est,
        Channel::MaxU,
        &exps,
        resolved.fit,
    )?;
    let doubling = doubling_check(
        &run.series,
        exps.alpha,
        th.ode_ratio_tol,
        th.doubling_tail as usize,
    )?;
    let err = (estimate.t_est - t_exact).abs();
    let mut verdicts = vec![
        Verdict::at(
            "oracle-ode",
            err <= th.ode_time_tol,
            format!(
                "T_est {:.4} vs exact {t_exact:.4}, error {err:.1e}",
                estimate.t_est
            ),
            format!("{:e}", th.ode_time_tol),
        ),
        exponent_verdict("oracle-ode", &fit, "α", th.ode_exponent_tol),
    ];
    verdicts.push(doubling.verdicts[2].clone());
    Ok(OdeOutcome {
        t_exact,
        estimate,
        fit,
        doubling,
        run,
        verdicts,
    })
}

fn scalar_q2(params: &SystemParams, command: &str) -> Result<f64, PipelineError> {
    if params.p1 != params.p2 || params.q1 != 2.0 || params.q2 != 2.0 {
        return Err(PipelineError::Unsupported(format!(
            "{command} applies to the scalar q = 2 equation: set p1 = p2 and q1 = q2 = 2"
        )));
    }
    Ok(params.p1)
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformOutcome {
    pub p: f64,
    pub nodes: usize,
    pub coarse_nodes: usize,
    pub fine: TransformComparison,
    pub coarse: TransformComparison,
    pub reduction: f64,
    pub verdicts: Vec<Verdict>,
}

/// Direct `q = 2` scalar run against the log-transformed run, on the
/// configured grid and on one with half the resolution.
pub fn transform_check(
    resolved: &Resolved,
    u_cap: f64,
    check_every: usize,
    th: &Thresholds,
) -> Result<TransformOutcome, PipelineError> {
    let params = &resolved.params;
    let p = scalar_q2(params, "oracle-transform")?;
    let nodes = resolved.grid.len();
    let coarse_nodes = (nodes - 1) / 2 + 1;
    let coarse_grid = RadialGrid::new(coarse_nodes, resolved.grid.radius())
        .map_err(|e| PipelineError::Unsupported(format!("grid too small to coarsen: {e}")))?;
    let fine = compare_with_transform(
        p,
        params,
        &resolved.grid,
        &resolved.solver,
        u_cap,
        check_every,
    )?;
    let coarse = compare_with_transform(
        p,
        params,
        &coarse_grid,
        &resolved.solver,
        u_cap,
        check_every,
    )?;
    let reduction = coarse.sup_diff / fine.sup_diff;
    let verdicts = vec![
        Verdict::at(
            "oracle-transform",
            fine.sup_diff <= th.transform_tol,
            format!(
                "sup |u − log(1+w)| {:.3e} at N={nodes} while max u ≤ {u_cap} (reached {:.3})",
                fine.sup_diff, fine.max_u
            ),
            format!("{:e}", th.transform_tol),
        ),
        Verdict::at(
            "oracle-transform",
            reduction >= th.transform_refinement,
            format!("N={coarse_nodes}→{nodes} reduces the difference {reduction:.2}×"),
            format!("{}×", th.transform_refinement),
        ),
    ];
    Ok(TransformOutcome {
        p,
        nodes,
        coarse_nodes,
        fine,
        coarse,
        reduction,
        verdicts,
    })
}

/// How the `q = 2` solution is computed for the blow-up-set analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Via {
    /// The equation itself, cut to the window where the gradient term is
    /// resolved.
    Direct,
    /// `u = log(1+w)` from the transformed equation, which has no gradient
    /// term and stays resolved.
    Transform,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupSetOutcome {
    pub p: f64,
    pub via: Via,
    pub stop_reason: StopReason,
    pub report: BlowupSetReport,
    pub expected: Option<BlowupSetClass>,
    #[serde(skip)]
    pub run: RunResult,
    pub verdicts: Vec<Verdict>,
}

/// Half-max width of the scalar `q = 2` solution near blow-up, judged
/// against single-point blow-up for `p > 2` and global blow-up for
/// `1 < p < 2`.
///
/// With [`Via::Transform`] the run stops once `max u` reaches `u_stop`.
pub fn blowup_set_check(
    resolved: &Resolved,
    via: Via,
    u_stop: f64,
    th: &Thresholds,
) -> Result<BlowupSetOutcome, PipelineError> {
    let params = &resolved.params;
    let p = scalar_q2(params, "blowup-set")?;
    let grid = &resolved.grid;
    let set = SetThresholds {
        single_point: th.single_point_width,
        global: th.global_width,
        ..SetThresholds::default()
    };
    let (run, report) = match via {
        Via::Direct => {
            let run = run_scalar(p, 2.0, params, grid, &resolved.solver)?;
            let report = blowup_set_width(&run.snapshots, &run.series, grid, Some(2.0), &set)?;
            (run, report)
        }
        Via::Transform => {
            let cfg = SolverConfig {
                m_stop: u_stop.exp().min(TRANSFORM_OVERFLOW),
                ..resolved.solver
            };
            let u0 = params.init.sample(grid, params.boundary).0;
            let mut run = transform_oracle(p, params, grid, &cfg, &u0)?;
            run.snapshots = log1p_snapshots(&run.snapshots);
            let report = blowup_set_width(&run.snapshots, &run.series, grid, None, &set)?;
            (run, report)
        }
    };
    let r = report.radius;
    let expected = if p > 2.0 {
        Some(BlowupSetClass::SinglePoint)
    } else if p < 2.0 {
        Some(BlowupSetClass::Global)
    } else {
        None
    };
    let window = format!(
        "{} late snapshots up to t = {:.6}{}",
        report.width.len(),
        report.resolved_until,
        if report.unresolved > 0 {
            format!(", {} unresolved dropped", report.unresolved)
        } else {
            String::new()
        }
    );
    let verdict = match expected {
        Some(BlowupSetClass::SinglePoint) => Verdict::new(
            "blow-up set",
            report.class == BlowupSetClass::SinglePoint,
            format!(
                "p = {p}: final half-max width {:.4}·R (< {}·R and shrinking expected), class {} [{window}]",
                report.final_width / r,
                th.single_point_width,
                report.class
            ),
        ),
        Some(_) => Verdict::new(
            "blow-up set",
            report.min_width > th.global_width * r,
            format!(
                "p = {p}: half-max width ≥ {:.4}·R (> {}·R expected), class {} [{window}]",
                report.min_width / r,
                th.global_width,
                report.class
            ),
        ),
        None => Verdict::new(
            "blow-up set",
            true,
            format!("p = {p}: class {} (no prediction at p = 2) [{window}]", report.class),
        ),
    };
    Ok(BlowupSetOutcome {
        p,
        via,
        stop_reason: run.stop_reason,
        report,
        expected,
        run,
        verdicts: vec![verdict],
    })
}
