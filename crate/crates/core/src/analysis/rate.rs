use serde::{Deserialize, Serialize};

use super::doubling::doubling_times;
use super::{linear_fit, AnalysisError};
use crate::model::Exponents;
use crate::solver::SupNormSeries;

/// Decades of `M` before the stop that fits ignore.
const TAIL_DECADES: f64 = 0.5;
/// Width in decades of the extrapolation window for `M_u^{-1/α}`.
const EXTRAPOLATION_DECADES: f64 = 1.0;
/// Allowed estimator disagreement as a fraction of `T − t_last_doubling`.
const ESTIMATOR_TOL: f64 = 0.05;
const MIN_DOUBLINGS: usize = 4;
const MIN_FIT_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    /// The reported estimate; equal to `extrapolated`.
    pub t_est: f64,
    /// Zero of the line fitted to `M_u^{-1/α}` against `t`.
    pub extrapolated: f64,
    /// `t_J + Δ_J·ρ/(1−ρ)` with `ρ = 2^{-1/α}`.
    pub geometric: f64,
    pub discrepancy: f64,
    pub t_last_doubling: f64,
    pub doublings: usize,
}

/// Blow-up time of `M_u ~ C(T−t)^{-α}`.
///
/// `M_u^{-1/α}` is affine in `t` for an exact power law, so a line through
/// the last resolved decade (ignoring the final half-decade) is extrapolated
/// to zero. The last doubling before the final half-decade gives an
/// independent geometric-series estimate; the two must agree to 5% of the
/// time left after that doubling.
pub fn estimate_blowup_time(
    series: &SupNormSeries,
    alpha: f64,
) -> Result<BlowupEstimate, AnalysisError> {
    if !(alpha > 0.0) {
        return Err(AnalysisError::Invalid(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    let times = doubling_times(series, alpha);
    let doublings = times.len().saturating_sub(1);
    if doublings < MIN_DOUBLINGS {
        return Err(AnalysisError::TooFewDoublings {
            needed: MIN_DOUBLINGS,
            found: doublings,
        });
    }

    let m_last = *series.m_u.last().expect("doublings imply samples");
    let hi = m_last * 10f64.powf(-TAIL_DECADES);
    let lo = hi * 10f64.powf(-EXTRAPOLATION_DECADES);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (t, m) in series.t.iter().zip(&series.m_u) {
        if *m >= lo && *m <= hi {
            xs.push(*t);
            ys.push(m.powf(-1.0 / alpha));
        }
    }
    if xs.len() < 3 {
        return Err(AnalysisError::InsufficientPoints {
            found: xs.len(),
            needed: 3,
        });
    }
    let (a, b, _) = linear_fit(&xs, &ys);
    let extrapolated = -a / b;

    // Doublings inside the final half-decade are ignored like the samples.
    let base = series.m_u[series
        .m_u
        .iter()
        .position(|m| *m > 0.0)
        .expect("doublings imply M_u > 0")];
    let resolved = times
        .iter()
        .enumerate()
        .take_while(|(j, _)| base * 2f64.powi(*j as i32) <= hi)
        .count();
    if resolved < MIN_DOUBLINGS + 1 {
        return Err(AnalysisError::TooFewDoublings {
            needed: MIN_DOUBLINGS,
            found: resolved.saturating_sub(1),
        });
    }
    let rho = 2f64.powf(-1.0 / alpha);
    let j = resolved - 1;
    let t_last = times[j];
    let geometric = t_last + (t_last - times[j - 1]) * rho / (1.0 - rho);

    let discrepancy = (extrapolated - geometric).abs();
    let allowed = ESTIMATOR_TOL * (extrapolated - t_last).abs();
    if !(discrepancy <= allowed) {
        return Err(AnalysisError::EstimatorsDisagree {
            primary: extrapolated,
            secondary: geometric,
            allowed,
        });
    }
    Ok(BlowupEstimate {
        t_est: extrapolated,
        extrapolated,
        geometric,
        discrepancy,
        t_last_doubling: t_last,
        doublings,
    })
}

/// A quantity recorded in the series whose blow-up rate can be fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "M_u")]
    MU,
    #[serde(rename = "M_v")]
    MV,
    #[serde(rename = "max_u")]
    MaxU,
    #[serde(rename = "max_v")]
    MaxV,
    /// `(max |∇u|)^θ1`.
    #[serde(rename = "max_grad_u^theta1")]
    GradU,
    /// `(max |∇v|)^θ2`.
    #[serde(rename = "max_grad_v^theta2")]
    GradV,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::MU,
        Channel::MV,
        Channel::MaxU,
        Channel::MaxV,
        Channel::GradU,
        Channel::GradV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::MU => "M_u",
            Channel::MV => "M_v",
            Channel::MaxU => "max_u",
            Channel::MaxV => "max_v",
            Channel::GradU => "max_grad_u^theta1",
            Channel::GradV => "max_grad_v^theta2",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == s)
    }

    /// `α` for the `u` channels, `β` for the `v` channels.
    pub fn predicted_exponent(self, exps: &Exponents) -> f64 {
        match self {
            Channel::MU | Channel::MaxU | Channel::GradU => exps.alpha,
            Channel::MV | Channel::MaxV | Channel::GradV => exps.beta,
        }
    }

    fn values(self, series: &SupNormSeries, exps: &Exponents) -> Vec<f64> {
        match self {
            Channel::MU => series.m_u.clone(),
            Channel::MV => series.m_v.clone(),
            Channel::MaxU => series.max_u.clone(),
            Channel::MaxV => series.max_v.clone(),
            Channel::GradU => series
                .max_grad_u
                .iter()
                .map(|g| g.powf(exps.theta1))
                .collect(),
            Channel::GradV => series
                .max_grad_v
                .iter()
                .map(|g| g.powf(exps.theta2))
                .collect(),
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fit window in units of `T_est`: `τ = T_est − t ∈ [lo, hi]·T_est`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { lo: 1e-3, hi: 1e-1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub channel: Channel,
    pub t_est: f64,
    /// Negated slope of `log channel` against `log(T_est − t)`.
    pub exponent: f64,
    pub predicted_exponent: f64,
    /// `C` in `channel ≈ C·(T_est − t)^{-exponent}`.
    pub amplitude: f64,
    /// In log10 units.
    pub rms_residual: f64,
    /// Smallest and largest `T_est − t` among the points used.
    pub window: (f64, f64),
    pub points_used: usize,
}

impl RateFit {
    pub fn rel_error(&self) -> f64 {
        (self.exponent - self.predicted_exponent).abs() / self.predicted_exponent
    }
}

/// First time at which `M_u` or `M_v` enters the final half-decade.
fn tail_cutoff(series: &SupNormSeries) -> f64 {
    let (Some(mu), Some(mv)) = (series.m_u.last(), series.m_v.last()) else {
        return f64::NEG_INFINITY;
    };
    let cut = 10f64.powf(-TAIL_DECADES);
    for k in 0..series.len() {
        if series.m_u[k] >= mu * cut || series.m_v[k] >= mv * cut {
            return series.t[k];
        }
    }
    f64::INFINITY
}

/// Indices of the samples inside the fit window and before the tail cutoff.
fn window_points(
    series: &SupNormSeries,
    t_est: f64,
    window: FitWindow,
    values: &[f64],
) -> Result<Vec<usize>, AnalysisError> {
    if !(window.lo > 0.0 && window.hi > window.lo) {
        return Err(AnalysisError::Invalid(format!(
            "fit window [{}, {}] must satisfy 0 < lo < hi",
            window.lo, window.hi
        )));
    }
    if !(t_est.is_finite() && t_est > 0.0) {
        return Err(AnalysisError::Invalid(format!(
            "T_est = {t_est} must be positive and finite"
        )));
    }
    let (lo, hi) = (window.lo * t_est, window.hi * t_est);
    let cutoff = tail_cutoff(series);
    let picked: Vec<usize> = (0..series.len())
        .filter(|&k| {
            let tau = t_est - series.t[k];
            tau >= lo && tau <= hi && series.t[k] < cutoff && values[k] > 0.0
        })
        .collect();
    if picked.is_empty() {
        let taus = series.t.iter().map(|t| t_est - t).filter(|tau| *tau > 0.0);
        let data_lo = taus.clone().fold(f64::INFINITY, f64::min);
        let data_hi = taus.fold(0.0, f64::max);
        return Err(AnalysisError::WindowOutsideData {
            lo,
            hi,
            data_lo,
            data_hi,
        });
    }
    if picked.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::InsufficientPoints {
            found: picked.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    Ok(picked)
}

/// Least-squares power law `channel ≈ C·(T_est − t)^{-e}` over the window.
pub fn fit_rate(
    series: &SupNormSeries,
    t_est: f64,
    channel: Channel,
    exps: &Exponents,
    window: FitWindow,
) -> Result<RateFit, AnalysisError> {
    let values = channel.values(series, exps);
    let picked = window_points(series, t_est, window, &values)?;
    let xs: Vec<f64> = picked
        .iter()
        .map(|&k| (t_est - series.t[k]).log10())
        .collect();
    let ys: Vec<f64> = picked.iter().map(|&k| values[k].log10()).collect();
    let (a, b, rms) = linear_fit(&xs, &ys);
    let taus = picked.iter().map(|&k| t_est - series.t[k]);
    Ok(RateFit {
        channel,
        t_est,
        exponent: -b,
        predicted_exponent: channel.predicted_exponent(exps),
        amplitude: 10f64.powf(a),
        rms_residual: rms,
        window: (
            taus.clone().fold(f64::INFINITY, f64::min),
            taus.fold(0.0, f64::max),
        ),
        points_used: picked.len(),
    })
}

/// Boundedness of `sup_{(0,t]} (max|∇u|)^θ1 · (T_est − t)^α` over the fit
/// window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    pub channel: Channel,
    /// Median of the product over the window.
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub factor: f64,
    pub bounded: bool,
}

/// The running max of the gradient channel times `(T_est − t)^{rate}`
/// must stay within `factor` of its median over the window, `rate` being
/// the channel's predicted exponent.
pub fn gradient_product_check(
    series: &SupNormSeries,
    t_est: f64,
    channel: Channel,
    exps: &Exponents,
    window: FitWindow,
    factor: f64,
) -> Result<ProductCheck, AnalysisError> {
    if !matches!(channel, Channel::GradU | Channel::GradV) {
        return Err(AnalysisError::Invalid(format!(
            "{channel} is not a gradient channel"
        )));
    }
    let values = channel.values(series, exps);
    let picked = window_points(series, t_est, window, &values)?;
    let rate = channel.predicted_exponent(exps);
    let mut running = Vec::with_capacity(values.len());
    let mut sup = f64::NEG_INFINITY;
    for v in &values {
        sup = sup.max(*v);
        running.push(sup);
    }
    let mut trace: Vec<f64> = picked
        .iter()
        .map(|&k| running[k] * (t_est - series.t[k]).powf(rate))
        .collect();
    trace.sort_by(f64::total_cmp);
    let median = trace[trace.len() / 2];
    let (min, max) = (trace[0], trace[trace.len() - 1]);
    Ok(ProductCheck {
        channel,
        median,
        min,
        max,
        factor,
        bounded: max <= factor * median && min >= median / factor,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Series with `M_u = C(T−t)^{-α}·(1 + eps·(T−t))`, `M_v = C(T−t)^{-β}`,
    /// sampled at 0.5% steps in `log τ` from `τ = T` down to `τ_end`.
    pub(crate) fn power_law_series(
        t_blow: f64,
        alpha: f64,
        beta: f64,
        eps: f64,
        tau_end: f64,
    ) -> SupNormSeries {
        let mut s = SupNormSeries::default();
        let mut tau = t_blow;
        while tau >= tau_end {
            let mu = tau.powf(-alpha) * (1.0 + eps * tau);
            let mv = tau.powf(-beta);
            s.push(t_blow - tau, mu, mv, mu, mv, mu, mv, 0.0);
            tau /= 1.005;
        }
        s
    }

    fn exps() -> Exponents {
        Exponents::from_powers(2.0, 3.0, 1.2, 1.2, 1).unwrap()
    }

    #[test]
    fn exact_power_law_gives_exact_time() {
        let s = power_law_series(1.0, 0.6, 0.8, 0.0, 1e-8);
        let est = estimate_blowup_time(&s, 0.6).unwrap();
        assert!((est.t_est - 1.0).abs() <= 1e-10, "{est:?}");
        assert!((est.geometric - 1.0).abs() <= 1e-10, "{est:?}");
    }

    #[test]
    fn perturbed_power_law_time_within_tolerance() {
        let s = power_law_series(1.0, 0.6, 0.8, 0.1, 1e-8);
        let est = estimate_blowup_time(&s, 0.6).unwrap();
        assert!((est.t_est - 1.0).abs() <= 1e-3, "{est:?}");
    }

    #[test]
    fn too_few_doublings_rejected() {
        let s = power_law_series(1.0, 1.0, 1.0, 0.0, 0.1);
        assert!(matches!(
            estimate_blowup_time(&s, 1.0),
            Err(AnalysisError::TooFewDoublings { .. })
        ));
    }

    #[test]
    fn inconsistent_estimators_rejected() {
        // With the wrong α the extrapolated line and the geometric series
        // point at different times.
        let s = power_law_series(1.0, 1.0, 1.0, 0.0, 1e-8);
        assert!(matches!(
            estimate_blowup_time(&s, 0.5),
            Err(AnalysisError::EstimatorsDisagree { .. })
        ));
    }

    #[test]
    fn exact_fit_on_synthetic_law() {
        let s = power_law_series(1.0, 0.6, 0.8, 0.0, 1e-8);
        let e = exps();
        let fu = fit_rate(&s, 1.0, Channel::MU, &e, FitWindow::default()).unwrap();
        assert!((fu.exponent - 0.6).abs() <= 1e-8);
        assert!(fu.rms_residual < 1e-10);
        assert!((fu.amplitude - 1.0).abs() < 1e-8);
        assert!(fu.points_used >= 8);
        let fv = fit_rate(&s, 1.0, Channel::MV, &e, FitWindow::default()).unwrap();
        assert!((fv.exponent - 0.8).abs() <= 1e-8);
        assert!(fv.rel_error() < 1e-8);
        assert!(fu.window.0 >= 1e-3 && fu.window.1 <= 1e-1);
    }

    #[test]
    fn fit_ignores_the_final_half_decade() {
        // Corrupt everything after M_u passes 10^{-0.5}·M_last: no effect.
        let mut s = power_law_series(1.0, 1.0, 1.0, 0.0, 1e-3 / 3.0);
        let cut = s.m_u.last().unwrap() * 10f64.powf(-0.5);
        for k in 0..s.len() {
            if s.m_u[k] > cut * 1.001 {
                s.max_u[k] *= 7.0;
            }
        }
        let e = Exponents::from_powers(2.0, 2.0, 1.2, 1.2, 1).unwrap();
        let w = FitWindow { lo: 1e-4, hi: 1e-1 };
        let f = fit_rate(&s, 1.0, Channel::MaxU, &e, w).unwrap();
        assert!((f.exponent - 1.0).abs() < 1e-8);
        assert!(f.window.0 >= 1e-3);
    }

    #[test]
    fn fit_window_errors() {
        let s = power_law_series(1.0, 0.6, 0.8, 0.0, 1e-8);
        let e = exps();
        let outside = FitWindow { lo: 2.0, hi: 3.0 };
        assert!(matches!(
            fit_rate(&s, 1.0, Channel::MU, &e, outside),
            Err(AnalysisError::WindowOutsideData { .. })
        ));
        let narrow = FitWindow { lo: 0.1, hi: 0.101 };
        assert!(matches!(
            fit_rate(&s, 1.0, Channel::MU, &e, narrow),
            Err(AnalysisError::InsufficientPoints { .. })
        ));
        let bad = FitWindow { lo: 0.1, hi: 0.01 };
        assert!(fit_rate(&s, 1.0, Channel::MU, &e, bad).is_err());
    }

    #[test]
    fn channel_names_round_trip() {
        for c in Channel::ALL {
            assert_eq!(Channel::parse(c.name()), Some(c));
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
        assert_eq!(Channel::parse("nope"), None);
    }

    #[test]
    fn gradient_product_bounded_on_power_law() {
        let e = exps();
        let mut s = power_law_series(1.0, 0.6, 0.8, 0.0, 1e-8);
        // Gradient channels: (max|∇u|)^θ1 ~ τ^{-α}.
        s.max_grad_u =
            s.t.iter()
                .map(|t| (1.0 - t).powf(-0.6 / e.theta1))
                .collect();
        s.max_grad_v =
            s.t.iter()
                .map(|t| (1.0 - t).powf(-0.8 / e.theta2))
                .collect();
        for c in [Channel::GradU, Channel::GradV] {
            let chk = gradient_product_check(&s, 1.0, c, &e, FitWindow::default(), 3.0).unwrap();
            assert!(chk.bounded, "{chk:?}");
            assert!((chk.max / chk.min - 1.0).abs() < 1e-8);
        }
        // A faster-growing gradient fails.
        s.max_grad_u =
            s.t.iter()
                .map(|t| (1.0 - t).powf(-1.5 / e.theta1))
                .collect();
        let chk =
            gradient_product_check(&s, 1.0, Channel::GradU, &e, FitWindow::default(), 3.0).unwrap();
        assert!(!chk.bounded);
        assert!(
            gradient_product_check(&s, 1.0, Channel::MU, &e, FitWindow::default(), 3.0).is_err()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn estimators_exact_for_any_alpha(alpha in 0.2f64..5.0, t_blow in 0.01f64..10.0) {
            // Sample down to M_u = 1e12 relative to the start.
            let tau_end = t_blow * 10f64.powf(-12.0 / alpha).max(1e-9);
            let s = power_law_series(t_blow, alpha, alpha, 0.0, tau_end);
            let est = estimate_blowup_time(&s, alpha).unwrap();
            prop_assert!((est.t_est - t_blow).abs() <= 1e-8 * t_blow);
            let e = Exponents::from_powers(2.0, 2.0, 1.2, 1.2, 1).unwrap();
            let w = FitWindow { lo: 1e-3, hi: 1e-1 };
            let s2 = power_law_series(t_blow, alpha, alpha, 0.0, t_blow * 1e-5);
            let f = fit_rate(&s2, t_blow, Channel::MU, &e, w).unwrap();
            prop_assert!((f.exponent - alpha).abs() <= 1e-8);
        }
    }
}
