//! Zooming into the blow-up point.
//!
//! With `γ = M_u(t0)^{-1/(2α)}` the rescaled fields
//! `φ1(y,s) = γ^{2α}·u(x*+γy, t*+γ²s)` and `φ2(y,s) = γ^{2β}·v(x*+γy, t*+γ²s)`
//! satisfy
//!
//! ```text
//! φ1_s = Δφ1 + γ^{μ1}|∇φ1|^{q1} + φ2^{p1}
//! φ2_s = Δφ2 + γ^{μ2}|∇φ2|^{q2} + φ1^{p2}
//! ```
//!
//! and `φ1 + |∇φ1|^{θ1} ≤ 1` for `s ≤ 0` because `M_u` is a running sup.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::grid::{gradient_magnitude, RadialGrid};
use crate::model::{Exponents, SystemParams};
use crate::solver::{Snapshot, SnapshotKind, SupNormSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameOptions {
    /// Frame covers `|y| ≤ half_width`.
    pub half_width: f64,
    /// Fewer grid nodes per unit of `y` is an error.
    pub min_nodes_per_unit: f64,
    /// `None` puts the `y` nodes on grid nodes; otherwise fields are
    /// interpolated cubically in `r` onto this spacing.
    pub y_step: Option<f64>,
    /// Required `(u + |∇u|^{θ1})(x*,t*) / M_u(t0)`.
    pub center_fraction: f64,
    /// Fallback when no recorded snapshot reaches `center_fraction`.
    pub relaxed_fraction: f64,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions {
            half_width: 5.0,
            min_nodes_per_unit: 4.0,
            y_step: None,
            center_fraction: 0.5,
            relaxed_fraction: 0.45,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLevel {
    pub s: f64,
    pub t: f64,
    /// Solver step of the snapshot; `None` for levels interpolated in time.
    pub step: Option<u64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledFrame {
    pub gamma: f64,
    pub x_star: f64,
    pub t_star: f64,
    pub t0: f64,
    pub m_u0: f64,
    /// `(u + |∇u|^{θ1})(x*,t*) / M_u(t0)`.
    pub peak_fraction: f64,
    /// The `center_fraction` requirement was relaxed.
    pub relaxed: bool,
    pub y: Vec<f64>,
    pub h_y: f64,
    /// Levels sorted by `s`; the last one is `s = 0`.
    pub levels: Vec<FrameLevel>,
    pub s_range: (f64, f64),
    pub n: usize,
    pub radius: f64,
    pub theta1: f64,
    pub theta2: f64,
    alpha: f64,
    beta: f64,
}

fn y_gradient(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len();
    let mut g = vec![0.0; m];
    if m < 3 {
        return g;
    }
    for j in 1..m - 1 {
        g[j] = (f[j + 1] - f[j - 1]).abs() / (2.0 * h);
    }
    g[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]).abs() / (2.0 * h);
    g[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]).abs() / (2.0 * h);
    g
}

impl RescaledFrame {
    pub fn center_index(&self) -> usize {
        self.y.len() / 2
    }

    pub fn level0(&self) -> &FrameLevel {
        self.levels.last().expect("frames hold at least one level")
    }

    /// `φ1 + |∇φ1|^{θ1}` on one level.
    pub fn functional(&self, level: &FrameLevel) -> Vec<f64> {
        let g = y_gradient(&level.phi1, self.h_y);
        level
            .phi1
            .iter()
            .zip(&g)
            .map(|(p, g)| p + g.powf(self.theta1))
            .collect()
    }

    /// Sup of `φ1 + |∇φ1|^{θ1}` over all levels.
    pub fn sup_functional(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| self.functional(l))
            .fold(0.0, f64::max)
    }

    /// `φ1(0,0) + |∇φ1(0,0)|^{θ1}`.
    pub fn center_value(&self) -> f64 {
        self.functional(self.level0())[self.center_index()]
    }

    /// Undoes the scaling on one level: pairs `(r, u)` with
    /// `r = |x* + γy|` and `u = γ^{-2α}φ1`.
    pub fn unscale(&self, level: &FrameLevel) -> Vec<(f64, f64)> {
        let amp = self.gamma.powf(-2.0 * self.alpha);
        self.y
            .iter()
            .zip(&level.phi1)
            .map(|(y, p)| ((self.x_star + self.gamma * y).abs(), amp * p))
            .collect()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Cubic Lagrange interpolation of a radial profile at `r`, extended
/// evenly across the origin.
fn interp_cubic(grid: &RadialGrid, f: &[f64], r: f64) -> f64 {
    let n = f.len() as i64;
    let h = grid.h();
    let x = r / h;
    let mut i0 = x.floor() as i64 - 1;
    i0 = i0.min(n - 4);
    let mut sum = 0.0;
    for k in 0..4 {
        let i = i0 + k;
        let mut w = 1.0;
        for m in 0..4 {
            if m != k {
                w *= (x - (i0 + m) as f64) / (k - m) as f64;
            }
        }
        sum += w * f[i.unsigned_abs() as usize];
    }
    sum
}

/// Time of `M_u`'s `level`-th doubling for every recorded doubling frame.
pub fn doubling_frame_times(snapshots: &[Snapshot]) -> Vec<(u32, f64)> {
    snapshots
        .iter()
        .filter_map(|s| match s.kind {
            SnapshotKind::Doubling { level, lag: 0 } => Some((level, s.state.t)),
            _ => None,
        })
        .collect()
}

/// Snapshots sorted by time with duplicate steps removed.
fn distinct(snapshots: &[Snapshot]) -> Vec<&Snapshot> {
    let mut v: Vec<&Snapshot> = snapshots.iter().collect();
    v.sort_by_key(|a| a.step);
    v.dedup_by_key(|s| s.step);
    v
}

/// Rescaled frame around the recorded point that realizes (at least a
/// fixed fraction of) `M_u(t0)`.
pub fn build_rescaled_frame(
    snapshots: &[Snapshot],
    series: &SupNormSeries,
    t0: f64,
    exps: &Exponents,
    grid: &RadialGrid,
    n: usize,
    opts: &FrameOptions,
) -> Result<RescaledFrame, AnalysisError> {
    let snaps = distinct(snapshots);
    let m_u0 = series
        .t
        .iter()
        .zip(&series.m_u)
        .filter(|(t, _)| **t <= t0)
        .map(|(_, m)| *m)
        .chain(snaps.iter().filter(|s| s.state.t <= t0).map(|s| s.m_u))
        .fold(0.0, f64::max);
    if !(m_u0 > 0.0) {
        return Err(AnalysisError::Invalid(format!(
            "M_u vanishes up to t0 = {t0}"
        )));
    }

    // Latest snapshot whose functional reaches the required fraction. The
    // maximum of u is preferred as x* when it qualifies.
    let mut chosen = None;
    let mut fallback = None;
    for snap in snaps.iter().rev().filter(|s| s.state.t <= t0) {
        let u = &snap.state.u;
        let g = gradient_magnitude(grid, u).map_err(|e| AnalysisError::Invalid(e.to_string()))?;
        let func: Vec<f64> = u
            .iter()
            .zip(&g)
            .map(|(u, g)| u + g.powf(exps.theta1))
            .collect();
        let arg_u = argmax(u);
        let arg_f = argmax(&func);
        let pick = if func[arg_u] >= opts.center_fraction * m_u0 {
            arg_u
        } else {
            arg_f
        };
        let frac = func[pick] / m_u0;
        if frac >= opts.center_fraction {
            chosen = Some((*snap, pick, frac));
            break;
        }
        if fallback.is_none() && frac >= opts.relaxed_fraction {
            fallback = Some((*snap, pick, frac));
        }
    }
    let relaxed = chosen.is_none();
    let (star, i_star, peak_fraction) = match chosen.or(fallback) {
        Some(c) => c,
        None => {
            return Err(AnalysisError::NoPeakSnapshot {
                t0,
                fraction: opts.relaxed_fraction,
            })
        }
    };
    if relaxed {
        log::warn!(
            "no snapshot at or before t0 = {t0} reaches {}·M_u(t0); using t* = {} at {peak_fraction:.3}",
            opts.center_fraction,
            star.state.t
        );
    }

    let gamma = m_u0.powf(-1.0 / (2.0 * exps.alpha));
    let x_star = grid.r(i_star);
    let t_star = star.state.t;
    let radius = grid.radius();
    if x_star + gamma * opts.half_width > radius * (1.0 + 1e-12) {
        return Err(AnalysisError::FrameOutsideDomain {
            gamma,
            half_width: opts.half_width,
        });
    }
    let per_unit = gamma / grid.h();
    if per_unit < opts.min_nodes_per_unit {
        return Err(AnalysisError::UnderResolved { per_unit });
    }

    let h_y = opts.y_step.unwrap_or(grid.h() / gamma);
    let half = (opts.half_width / h_y * (1.0 + 1e-12)).floor() as i64;
    let offsets: Vec<i64> = (-half..=half).collect();
    let y: Vec<f64> = offsets.iter().map(|j| *j as f64 * h_y).collect();
    let amp_u = gamma.powf(2.0 * exps.alpha);
    let amp_v = gamma.powf(2.0 * exps.beta);
    let sample = |f: &[f64]| -> Vec<f64> {
        match opts.y_step {
            None => offsets
                .iter()
                .map(|j| f[(i_star as i64 + j).unsigned_abs() as usize])
                .collect(),
            Some(_) => y
                .iter()
                .map(|y| interp_cubic(grid, f, (x_star + gamma * y).abs()))
                .collect(),
        }
    };
    let level_from = |t: f64, step: Option<u64>, u: &[f64], v: &[f64]| FrameLevel {
        s: (t - t_star) / (gamma * gamma),
        t,
        step,
        phi1: sample(u).into_iter().map(|x| amp_u * x).collect(),
        phi2: sample(v).into_iter().map(|x| amp_v * x).collect(),
    };

    let t_lo = t_star - gamma * gamma;
    let mut levels: Vec<FrameLevel> = snaps
        .iter()
        .filter(|s| s.state.t >= t_lo && s.step <= star.step)
        .map(|s| level_from(s.state.t, Some(s.step), &s.state.u, &s.state.v))
        .collect();
    // Fill s = −1 by linear interpolation in t when it is bracketed.
    let has_start = levels.first().is_some_and(|l| l.s <= -1.0 + 1e-12);
    if !has_start {
        let before = snaps.iter().rev().find(|s| s.state.t < t_lo);
        let after = snaps
            .iter()
            .find(|s| s.state.t > t_lo && s.step <= star.step);
        if let (Some(a), Some(b)) = (before, after) {
            let w = (t_lo - a.state.t) / (b.state.t - a.state.t);
            let mix = |x: &[f64], z: &[f64]| -> Vec<f64> {
                x.iter()
                    .zip(z)
                    .map(|(x, z)| (1.0 - w) * x + w * z)
                    .collect()
            };
            let u = mix(&a.state.u, &b.state.u);
            let v = mix(&a.state.v, &b.state.v);
            levels.insert(0, level_from(t_lo, None, &u, &v));
        }
    }
    let s_range = (levels[0].s, levels[levels.len() - 1].s);
    Ok(RescaledFrame {
        gamma,
        x_star,
        t_star,
        t0,
        m_u0,
        peak_fraction,
        relaxed,
        y,
        h_y,
        levels,
        s_range,
        n,
        radius,
        theta1: exps.theta1,
        theta2: exps.theta2,
        alpha: exps.alpha,
        beta: exps.beta,
    })
}

fn argmax(f: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in f.iter().enumerate() {
        if *x > f[best] {
            best = i;
        }
    }
    best
}

/// Max-norms of the individual terms of one rescaled equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TermBudget {
    pub time: f64,
    pub diffusion: f64,
    /// `γ^μ|∇φ|^q`.
    pub gradient: f64,
    pub reaction: f64,
}

impl TermBudget {
    /// Fraction of the total term size contributed by the gradient term.
    pub fn gradient_share(&self) -> f64 {
        let total = self.time + self.diffusion + self.gradient + self.reaction;
        if total > 0.0 {
            self.gradient / total
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub res1: f64,
    pub res2: f64,
    pub budget1: TermBudget,
    pub budget2: TermBudget,
    pub gamma: f64,
    /// Rescaled time of the level the residual is evaluated on.
    pub s_mid: f64,
}

/// Residuals of the rescaled equations on the middle of the last three
/// recorded levels.
///
/// `φ_s` is the second-order central difference on the (possibly uneven)
/// level spacing; `Δ` and `∇` use the radial stencils of the solver in `y`.
pub fn rescaled_residual(
    frame: &RescaledFrame,
    params: &SystemParams,
    exps: &Exponents,
) -> Result<ResidualReport, AnalysisError> {
    let exact: Vec<&FrameLevel> = frame.levels.iter().filter(|l| l.step.is_some()).collect();
    if exact.len() < 3 {
        return Err(AnalysisError::TooFewLevels(exact.len()));
    }
    let [l0, l1, l2] = [
        exact[exact.len() - 3],
        exact[exact.len() - 2],
        exact[exact.len() - 1],
    ];
    let (a, b) = (l1.s - l0.s, l2.s - l1.s);
    let g = frame.gamma;
    let h = frame.h_y;
    let m = frame.y.len();
    let n = frame.n as f64;

    let sweep = |f0: &[f64], f1: &[f64], f2: &[f64], other: &[f64], mu: f64, q: f64, p: f64| {
        let weight = g.powf(mu);
        let mut budget = TermBudget::default();
        let mut res: f64 = 0.0;
        for j in 1..m.saturating_sub(1) {
            let x = frame.x_star + g * frame.y[j];
            if x.abs() >= frame.radius * (1.0 - 1e-12) {
                continue;
            }
            let ft = (a * a * (f2[j] - f1[j]) + b * b * (f1[j] - f0[j])) / (a * b * (a + b));
            let second = (f1[j + 1] - 2.0 * f1[j] + f1[j - 1]) / (h * h);
            let slope = (f1[j + 1] - f1[j - 1]) / (2.0 * h);
            let rho = x.abs() / g;
            let lap = if rho <= 0.5 * h {
                n * second
            } else {
                second + (n - 1.0) / rho * slope * x.signum()
            };
            let grad = weight * slope.abs().powf(q);
            let react = other[j].powf(p);
            res = res.max((ft - lap - grad - react).abs());
            budget.time = budget.time.max(ft.abs());
            budget.diffusion = budget.diffusion.max(lap.abs());
            budget.gradient = budget.gradient.max(grad);
            budget.reaction = budget.reaction.max(react);
        }
        (res, budget)
    };
    let (res1, budget1) = sweep(
        &l0.phi1, &l1.phi1, &l2.phi1, &l1.phi2, exps.mu1, params.q1, params.p1,
    );
    let (res2, budget2) = sweep(
        &l0.phi2, &l1.phi2, &l2.phi2, &l1.phi1, exps.mu2, params.q2, params.p2,
    );
    Ok(ResidualReport {
        res1,
        res2,
        budget1,
        budget2,
        gamma: g,
        s_mid: l1.s,
    })
}
