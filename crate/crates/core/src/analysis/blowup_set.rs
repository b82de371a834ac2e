use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::grid::{gradient_magnitude, RadialGrid};
use crate::solver::{Snapshot, SupNormSeries};

const MIN_LATE_SNAPSHOTS: usize = 3;

/// Width cuts as fractions of the domain radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetThresholds {
    /// Level set `{u ≥ theta·max u}`.
    pub theta: f64,
    /// Final width below `single_point·R` (and shrinking) is single-point.
    pub single_point: f64,
    /// Width above `global·R` throughout is global.
    pub global: f64,
    /// Largest admissible cell Péclet number `q·|∂_r u|^{q−1}·h/2` of the
    /// gradient term. Beyond 1 the central stencil loses monotonicity and
    /// the profile near the boundary is no longer resolved.
    pub max_peclet: f64,
}

impl Default for SetThresholds {
    fn default() -> Self {
        SetThresholds {
            theta: 0.5,
            single_point: 0.2,
            global: 0.5,
            max_peclet: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowupSetClass {
    SinglePoint,
    Regional,
    Global,
}

impl std::fmt::Display for BlowupSetClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BlowupSetClass::SinglePoint => "single-point",
            BlowupSetClass::Regional => "regional",
            BlowupSetClass::Global => "global",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupSetReport {
    pub t: Vec<f64>,
    pub width: Vec<f64>,
    pub max_u: Vec<f64>,
    pub min_width: f64,
    pub final_width: f64,
    pub radius: f64,
    pub class: BlowupSetClass,
    /// Time of the last snapshot inside the resolved window.
    pub resolved_until: f64,
    /// Late snapshots dropped for exceeding the Péclet bound.
    pub unresolved: usize,
}

/// Cell Péclet number `q·max|∂_r u|^{q−1}·h/2` of the term `|∂_r u|^q`.
pub fn cell_peclet(grid: &RadialGrid, u: &[f64], q: f64) -> f64 {
    let g =
        gradient_magnitude(grid, u).map_or(f64::INFINITY, |g| g.into_iter().fold(0.0, f64::max));
    0.5 * q * g.powf(q - 1.0) * grid.h()
}

/// Outer radius of `{r : f(r) ≥ theta·max f}`.
///
/// Between the last node inside the set and the first outside, `ln f` is
/// interpolated linearly in `r²`, which is exact for centred Gaussians.
pub fn half_max_radius(grid: &RadialGrid, f: &[f64], theta: f64) -> f64 {
    let peak = f.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return 0.0;
    }
    let level = theta * peak;
    let Some(k) = f.iter().rposition(|x| *x >= level) else {
        return 0.0;
    };
    if k + 1 == f.len() {
        return grid.radius();
    }
    let (r0, r1) = (grid.r(k), grid.r(k + 1));
    let (f0, f1) = (f[k], f[k + 1]);
    if f1 > 0.0 {
        let w = (level / f0).ln() / (f1 / f0).ln();
        (r0 * r0 + w * (r1 * r1 - r0 * r0)).sqrt()
    } else {
        r0 + (f0 - level) / (f0 - f1) * (r1 - r0)
    }
}

/// Width of the `theta`-level set of `u` over the second half of the run,
/// and its classification.
///
/// With `q = Some(q)` only the resolved window counts: snapshots are taken
/// in time order up to the first one whose cell Péclet number exceeds
/// `thresholds.max_peclet`. Pass `None` for equations without a gradient
/// term, such as the log-transformed `q = 2` problem.
pub fn blowup_set_width(
    snapshots: &[Snapshot],
    series: &SupNormSeries,
    grid: &RadialGrid,
    q: Option<f64>,
    thresholds: &SetThresholds,
) -> Result<BlowupSetReport, AnalysisError> {
    if !(thresholds.theta > 0.0 && thresholds.theta < 1.0) {
        return Err(AnalysisError::Invalid(format!(
            "theta = {} must lie in (0,1)",
            thresholds.theta
        )));
    }
    let t_end = series.t.last().copied().unwrap_or(0.0);
    let mut late: Vec<&Snapshot> = snapshots
        .iter()
        .filter(|s| s.state.t >= 0.5 * t_end)
        .collect();
    late.sort_by_key(|s| s.step);
    late.dedup_by_key(|s| s.step);
    let total = late.len();
    if let Some(q) = q {
        if let Some(k) = late
            .iter()
            .position(|s| cell_peclet(grid, &s.state.u, q) > thresholds.max_peclet)
        {
            late.truncate(k);
        }
    }
    let unresolved = total - late.len();
    if late.len() < MIN_LATE_SNAPSHOTS {
        return Err(AnalysisError::TooFewSnapshots {
            needed: MIN_LATE_SNAPSHOTS,
            found: late.len(),
        });
    }
    let radius = grid.radius();
    let mut rep = BlowupSetReport {
        t: Vec::new(),
        width: Vec::new(),
        max_u: Vec::new(),
        min_width: f64::INFINITY,
        final_width: 0.0,
        radius,
        class: BlowupSetClass::Regional,
        resolved_until: late.last().expect("nonempty").state.t,
        unresolved,
    };
    for s in late {
        let w = half_max_radius(grid, &s.state.u, thresholds.theta);
        rep.t.push(s.state.t);
        rep.width.push(w);
        rep.max_u
            .push(s.state.u.iter().copied().fold(0.0, f64::max));
        rep.min_width = rep.min_width.min(w);
    }
    rep.final_width = *rep.width.last().expect("nonempty");
    let shrinking = rep.final_width < rep.width[0];
    rep.class = if rep.final_width < thresholds.single_point * radius && shrinking {
        BlowupSetClass::SinglePoint
    } else if rep.min_width > thresholds.global * radius {
        BlowupSetClass::Global
    } else {
        BlowupSetClass::Regional
    };
    Ok(rep)
}
