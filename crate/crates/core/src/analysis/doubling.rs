use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::solver::SupNormSeries;

const MIN_DOUBLINGS: usize = 5;

/// Times at which `M_u` first reaches `2^j·M_u(t_0)`, `j = 0, 1, …`, where
/// `t_0` is the first sample with positive `M_u`.
///
/// Between samples `t` is interpolated linearly in `M_u^{-1/α}`, which is
/// monotone in `M_u` and exact on the power law `C(T−t)^{-α}`.
pub fn doubling_times(series: &SupNormSeries, alpha: f64) -> Vec<f64> {
    let Some(start) = series.m_u.iter().position(|m| *m > 0.0) else {
        return Vec::new();
    };
    let base = series.m_u[start];
    let mut times = vec![series.t[start]];
    let mut level = 2.0 * base;
    for k in start + 1..series.len() {
        let (m0, m1) = (series.m_u[k - 1], series.m_u[k]);
        while m1 >= level {
            let t = if m1 == level || m0 == m1 {
                series.t[k]
            } else {
                let y = |m: f64| m.powf(-1.0 / alpha);
                let w = (y(level) - y(m0)) / (y(m1) - y(m0));
                series.t[k - 1] + w * (series.t[k] - series.t[k - 1])
            };
            times.push(t);
            level *= 2.0;
        }
    }
    times
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// `t_0 < t_1 < …` with `M_u(t_j) = 2^j·M_u(t_0)`.
    pub t_j: Vec<f64>,
    pub m_j: Vec<f64>,
    /// `D_j = M_u^{1/α}(t_j)·(t_{j+1} − t_j)`, one shorter than `t_j`.
    pub d_j: Vec<f64>,
    /// `(t_{j+2} − t_{j+1})/(t_{j+1} − t_j)`; equals `2^{-1/α}` on a power law.
    pub ratio_j: Vec<f64>,
    pub sup_d: f64,
    /// `2^{-1/α}`.
    pub predicted_ratio: f64,
}

impl DoublingReport {
    /// Geometric mean of the last `k` interval ratios.
    pub fn tail_ratio(&self, k: usize) -> f64 {
        let k = k.min(self.ratio_j.len());
        let tail = &self.ratio_j[self.ratio_j.len() - k..];
        (tail.iter().map(|r| r.ln()).sum::<f64>() / k as f64).exp()
    }

    /// The last `k` values of `D_j` increase with non-shrinking increments,
    /// the signature of a divergent sequence.
    pub fn diverging_tail(&self, k: usize) -> bool {
        let k = k.min(self.d_j.len());
        if k < 3 {
            return false;
        }
        let tail = &self.d_j[self.d_j.len() - k..];
        let steps: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
        steps.iter().all(|s| *s > 0.0) && steps.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Doubling structure of `M_u`: the normalized intervals `D_j` stay
/// bounded and successive intervals shrink by `2^{-1/α}`.
pub fn doubling_analysis(
    series: &SupNormSeries,
    alpha: f64,
) -> Result<DoublingReport, AnalysisError> {
    if !(alpha > 0.0) {
        return Err(AnalysisError::Invalid(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    let t_j = doubling_times(series, alpha);
    let found = t_j.len().saturating_sub(1);
    if found < MIN_DOUBLINGS {
        return Err(AnalysisError::TooFewDoublings {
            needed: MIN_DOUBLINGS,
            found,
        });
    }
    let start = series
        .m_u
        .iter()
        .position(|m| *m > 0.0)
        .expect("doublings found");
    let base = series.m_u[start];
    let m_j: Vec<f64> = (0..t_j.len()).map(|j| base * 2f64.powi(j as i32)).collect();
    let intervals: Vec<f64> = t_j.windows(2).map(|w| w[1] - w[0]).collect();
    let d_j: Vec<f64> = intervals
        .iter()
        .zip(&m_j)
        .map(|(dt, m)| m.powf(1.0 / alpha) * dt)
        .collect();
    let ratio_j = intervals.windows(2).map(|w| w[1] / w[0]).collect();
    let sup_d = d_j.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DoublingReport {
        t_j,
        m_j,
        d_j,
        ratio_j,
        sup_d,
        predicted_ratio: 2f64.powf(-1.0 / alpha),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTrace {
    pub t: Vec<f64>,
    /// `Φ = M_u^{-1/(2α)}·M_v^{1/(2β)}`.
    pub phi: Vec<f64>,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl RatioTrace {
    pub fn spread(&self) -> f64 {
        self.phi_max / self.phi_min
    }
}

/// `Φ(t)` over the second half `t > T_est/2` of the run.
///
/// Computed as `exp(−ln M_u/(2α) + ln M_v/(2β))`, so that `M_u = M_v`
/// with `α = β` gives exactly 1.
pub fn ratio_trace(
    series: &SupNormSeries,
    alpha: f64,
    beta: f64,
    t_est: f64,
) -> Result<RatioTrace, AnalysisError> {
    let mut out = RatioTrace {
        t: Vec::new(),
        phi: Vec::new(),
        phi_min: f64::INFINITY,
        phi_max: f64::NEG_INFINITY,
    };
    for k in 0..series.len() {
        let t = series.t[k];
        if t <= 0.5 * t_est || t >= t_est {
            continue;
        }
        let (mu, mv) = (series.m_u[k], series.m_v[k]);
        if !(mu > 0.0 && mv > 0.0) {
            return Err(AnalysisError::ZeroFunctional);
        }
        let phi = (-mu.ln() / (2.0 * alpha) + mv.ln() / (2.0 * beta)).exp();
        out.t.push(t);
        out.phi.push(phi);
        out.phi_min = out.phi_min.min(phi);
        out.phi_max = out.phi_max.max(phi);
    }
    if out.t.is_empty() {
        return Err(AnalysisError::Invalid(format!(
            "no samples in the ratio window ({}, {t_est})",
            0.5 * t_est
        )));
    }
    Ok(out)
}
