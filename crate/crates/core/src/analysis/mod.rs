//! Post-processing of a run: blow-up time, rate exponents, doubling
//! structure, the `M_u`/`M_v` ratio, rescaled frames and the blow-up set.
//!
//! Everything here is a pure function of a finished [`RunResult`](crate::solver::RunResult)
//! or its parts.

mod blowup_set;
mod doubling;
mod rate;
mod rescale;

pub use blowup_set::{
    blowup_set_width, cell_peclet, half_max_radius, BlowupSetClass, BlowupSetReport, SetThresholds,
};
pub use doubling::{doubling_analysis, doubling_times, ratio_trace, DoublingReport, RatioTrace};
pub use rate::{
    estimate_blowup_time, fit_rate, gradient_product_check, BlowupEstimate, Channel, FitWindow,
    ProductCheck, RateFit,
};
pub use rescale::{
    build_rescaled_frame, doubling_frame_times, rescaled_residual, FrameLevel, FrameOptions,
    RescaledFrame, ResidualReport, TermBudget,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} doublings of M_u, found {found}")]
    TooFewDoublings { needed: usize, found: usize },
    #[error(
        "blow-up time estimators disagree: extrapolation {primary}, geometric series {secondary} \
         (allowed {allowed:e})"
    )]
    EstimatorsDisagree {
        primary: f64,
        secondary: f64,
        allowed: f64,
    },
    #[error("only {found} samples in the fit window, need {needed}")]
    InsufficientPoints { found: usize, needed: usize },
    #[error("fit window τ ∈ [{lo:e}, {hi:e}] lies outside the recorded τ range [{data_lo:e}, {data_hi:e}]")]
    WindowOutsideData {
        lo: f64,
        hi: f64,
        data_lo: f64,
        data_hi: f64,
    },
    #[error("sup-functionals vanish inside the ratio window")]
    ZeroFunctional,
    #[error("scaling factor {gamma:e} too large: the frame |y| ≤ {half_width} leaves the domain")]
    FrameOutsideDomain { gamma: f64, half_width: f64 },
    #[error("frame under-resolved: {per_unit:.2} grid nodes per unit of y")]
    UnderResolved { per_unit: f64 },
    #[error("no recorded snapshot at or before t0 = {t0} reaches {fraction}·M_u(t0)")]
    NoPeakSnapshot { t0: f64, fraction: f64 },
    #[error("need at least 3 time levels in the frame, have {0}")]
    TooFewLevels(usize),
    #[error("need at least {needed} snapshots in the late window, have {found}")]
    TooFewSnapshots { needed: usize, found: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Ordinary least squares `y ≈ a + b·x`; returns `(a, b, rms residual)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    (intercept, slope, (ss / n).sqrt())
}
