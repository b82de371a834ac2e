//! Time integration into blow-up.
//!
//! Forward Euler with two step limits: the diffusive bound
//! `safety·h²/(2n)` and a reaction cap on the relative growth of each
//! component's maximum. The cap shrinks the step like the local blow-up
//! time scale, so the integration can follow the solution over many decades.

mod integrator;
mod oracle;

pub use oracle::homogeneous_blowup_time;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{FieldState, GridError, RadialGrid};
use crate::model::{Boundary, Exponents, InitKind, ModelError, SystemParams};
use integrator::{Advance, Integrator, Power, Source};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("integration fault at t = {t}: node {index} went negative ({value:e})")]
    Negativity { t: f64, index: usize, value: f64 },
    #[error("nonfinite values at t = {0}")]
    Nonfinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Fraction of the explicit diffusive limit `h²/(2n)`.
    pub safety: f64,
    /// Largest allowed relative growth of a component's sup per step.
    pub reaction_cap: f64,
    /// Stop once `max(M_u, M_v)` reaches this level.
    pub m_stop: f64,
    pub t_max: f64,
    /// Series sampling stride in steps; every `record_every`-th series
    /// sample also stores a snapshot.
    pub record_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            safety: 0.4,
            reaction_cap: 0.05,
            m_stop: 1e8,
            t_max: 10.0,
            record_every: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::Config(msg.to_string()));
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad("safety must lie in (0,1)");
        }
        if !(self.reaction_cap > 0.0 && self.reaction_cap < 1.0) {
            return bad("reaction_cap must lie in (0,1)");
        }
        if !(self.m_stop > 0.0 && self.m_stop.is_finite()) {
            return bad("m_stop must be positive and finite");
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be positive and finite");
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1");
        }
        Ok(())
    }
}

/// Series samples grow no more than this factor apart in `M_u` or `M_v`.
const SAMPLE_GROWTH: f64 = 1.01;

/// Boundary-adjacent values above this fraction of the peak invalidate a
/// truncated whole-space run.
const TRUNCATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Threshold,
    TMax,
    Nonfinite,
    TruncationContaminated,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Threshold => "threshold",
            StopReason::TMax => "t_max",
            StopReason::Nonfinite => "nonfinite",
            StopReason::TruncationContaminated => "truncation_contaminated",
        })
    }
}

/// Time series of the running sup-functionals and raw maxima.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SupNormSeries {
    pub t: Vec<f64>,
    /// Running sup over `(0, t]` of `max(u + |∇u|^θ1)`.
    pub m_u: Vec<f64>,
    pub m_v: Vec<f64>,
    pub max_u: Vec<f64>,
    pub max_v: Vec<f64>,
    pub max_grad_u: Vec<f64>,
    pub max_grad_v: Vec<f64>,
    pub argmax_r_u: Vec<f64>,
}

impl SupNormSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        t: f64,
        m_u: f64,
        m_v: f64,
        max_u: f64,
        max_v: f64,
        max_grad_u: f64,
        max_grad_v: f64,
        argmax_r_u: f64,
    ) {
        self.t.push(t);
        self.m_u.push(m_u);
        self.m_v.push(m_v);
        self.max_u.push(max_u);
        self.max_v.push(max_v);
        self.max_grad_u.push(max_grad_u);
        self.max_grad_v.push(max_grad_v);
        self.argmax_r_u.push(argmax_r_u);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Initial,
    Stride,
    /// `M_u` first reached `2^level · M_u(0)`; `lag` counts steps before
    /// the crossing step (0 is the crossing step itself).
    Doubling {
        level: u32,
        lag: u32,
    },
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub kind: SnapshotKind,
    /// Running sup-functionals at this instant.
    pub m_u: f64,
    pub m_v: f64,
    pub state: FieldState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub series: SupNormSeries,
    pub snapshots: Vec<Snapshot>,
    pub stop_reason: StopReason,
    pub steps_taken: u64,
}

impl RunResult {
    pub fn final_state(&self) -> &FieldState {
        &self
            .snapshots
            .last()
            .expect("runs always store a final snapshot")
            .state
    }
}

fn system_source(params: &SystemParams) -> Source {
    Source::System {
        p1: Power::new(params.p1),
        p2: Power::new(params.p2),
        q1: Power::new(params.q1),
        q2: Power::new(params.q2),
    }
}

fn initial_state(params: &SystemParams, grid: &RadialGrid) -> FieldState {
    let (u, v) = params.init.sample(grid, params.boundary);
    FieldState { t: 0.0, u, v }
}

fn check_grid(params: &SystemParams, grid: &RadialGrid) -> Result<(), SolverError> {
    if (grid.radius() - params.domain.radius()).abs() > 1e-12 * params.domain.radius() {
        return Err(SolverError::Config(format!(
            "grid radius {} does not match domain radius {}",
            grid.radius(),
            params.domain.radius()
        )));
    }
    Ok(())
}

/// One forward Euler step of the system.
pub fn step(
    state: &FieldState,
    grid: &RadialGrid,
    params: &SystemParams,
    exps: &Exponents,
    cfg: &SolverConfig,
) -> Result<(FieldState, f64), SolverError> {
    params.validate()?;
    cfg.validate()?;
    let mut it = Integrator::new(
        grid,
        params.n,
        params.boundary,
        system_source(params),
        cfg,
        (exps.theta1, exps.theta2),
        state.clone(),
    )?;
    match it.advance(f64::INFINITY)? {
        Advance::Stepped(dt) => Ok((it.state, dt)),
        Advance::Nonfinite => Err(SolverError::Nonfinite(state.t)),
    }
}

/// State of the snapshot/series bookkeeping during one run.
struct Recorder {
    cfg: SolverConfig,
    monitor_truncation: bool,
    series: SupNormSeries,
    snapshots: Vec<Snapshot>,
    m_run: (f64, f64),
    last_sample: (f64, f64),
    doubling_base: f64,
    next_level: u32,
    lag1: Option<Snapshot>,
    lag2: Option<Snapshot>,
    steps: u64,
}

impl Recorder {
    fn new(cfg: &SolverConfig, monitor_truncation: bool, it: &Integrator) -> Self {
        let mut rec = Recorder {
            cfg: *cfg,
            monitor_truncation,
            series: SupNormSeries::default(),
            snapshots: Vec::new(),
            m_run: it.m_inst,
            last_sample: it.m_inst,
            doubling_base: it.m_inst.0,
            next_level: 1,
            lag1: None,
            lag2: None,
            steps: 0,
        };
        rec.sample(it);
        rec.snapshot(it, SnapshotKind::Initial);
        rec
    }

    fn current(&self, it: &Integrator, kind: SnapshotKind) -> Snapshot {
        Snapshot {
            step: self.steps,
            kind,
            m_u: self.m_run.0,
            m_v: self.m_run.1,
            state: it.state.clone(),
        }
    }

    fn snapshot(&mut self, it: &Integrator, kind: SnapshotKind) {
        let snap = self.current(it, kind);
        self.snapshots.push(snap);
    }

    fn sample(&mut self, it: &Integrator) {
        let max = |f: &[f64]| f.iter().copied().fold(0.0, f64::max);
        let (gu, gv) = it.max_grads();
        let r_arg = {
            let u = &it.state.u;
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for (i, &x) in u.iter().enumerate() {
                if x > best {
                    best = x;
                    arg = i;
                }
            }
            it.grid().r(arg)
        };
        self.series.push(
            it.state.t,
            self.m_run.0,
            self.m_run.1,
            max(&it.state.u),
            max(&it.state.v),
            gu,
            gv,
            r_arg,
        );
        self.last_sample = self.m_run;
        if self.series.len().is_multiple_of(self.cfg.record_every) {
            self.snapshot(it, SnapshotKind::Stride);
        }
    }

    /// Keeps the two most recent pre-step states for doubling frames.
    fn remember(&mut self, it: &Integrator) {
        let mut slot = self.lag2.take();
        match &mut slot {
            Some(s) => {
                s.step = self.steps;
                s.m_u = self.m_run.0;
                s.m_v = self.m_run.1;
                s.state.t = it.state.t;
                s.state.u.copy_from_slice(&it.state.u);
                s.state.v.copy_from_slice(&it.state.v);
            }
            None => slot = Some(self.current(it, SnapshotKind::Stride)),
        }
        self.lag2 = self.lag1.take();
        self.lag1 = slot;
    }

    fn after_step(&mut self, it: &Integrator) -> Option<StopReason> {
        self.steps += 1;
        self.m_run.0 = self.m_run.0.max(it.m_inst.0);
        self.m_run.1 = self.m_run.1.max(it.m_inst.1);

        let mut doubled = false;
        if self.doubling_base <= 0.0 && self.m_run.0 > 0.0 {
            self.doubling_base = self.m_run.0;
        } else if self.doubling_base > 0.0
            && self.m_run.0 >= self.doubling_base * 2f64.powi(self.next_level as i32)
        {
            let level = (self.m_run.0 / self.doubling_base).log2().floor() as u32;
            let level = level.max(self.next_level);
            for (lag, snap) in [(2, &self.lag2), (1, &self.lag1)] {
                if let Some(s) = snap {
                    let mut s = s.clone();
                    s.kind = SnapshotKind::Doubling { level, lag };
                    self.snapshots.push(s);
                }
            }
            self.snapshot(it, SnapshotKind::Doubling { level, lag: 0 });
            self.next_level = level + 1;
            doubled = true;
        }

        let stop = if self.m_run.0.max(self.m_run.1) >= self.cfg.m_stop {
            Some(StopReason::Threshold)
        } else if it.state.t >= self.cfg.t_max {
            Some(StopReason::TMax)
        } else if self.monitor_truncation && contaminated(&it.state) {
            Some(StopReason::TruncationContaminated)
        } else {
            None
        };

        let grown = self.m_run.0 >= self.last_sample.0 * SAMPLE_GROWTH
            || self.m_run.1 >= self.last_sample.1 * SAMPLE_GROWTH;
        if doubled
            || grown
            || stop.is_some()
            || self.steps.is_multiple_of(self.cfg.record_every as u64)
        {
            self.sample(it);
        }
        stop
    }

    fn finish(mut self, it: &Integrator, stop_reason: StopReason) -> RunResult {
        if self.series.t.last() != Some(&it.state.t) {
            self.sample(it);
        }
        self.snapshot(it, SnapshotKind::Final);
        RunResult {
            series: self.series,
            snapshots: self.snapshots,
            stop_reason,
            steps_taken: self.steps,
        }
    }
}

fn contaminated(state: &FieldState) -> bool {
    let len = state.u.len();
    let check = |f: &[f64]| {
        let peak = f.iter().copied().fold(0.0, f64::max);
        peak > 0.0 && f[len - 2] > TRUNCATION_TOL * peak
    };
    check(&state.u) || check(&state.v)
}

fn drive(
    mut it: Integrator,
    cfg: &SolverConfig,
    monitor_truncation: bool,
) -> Result<RunResult, SolverError> {
    let initial = it.m_inst.0.max(it.m_inst.1);
    if initial >= cfg.m_stop {
        return Err(SolverError::Config(format!(
            "m_stop = {} does not exceed the initial sup {initial}",
            cfg.m_stop
        )));
    }
    let mut rec = Recorder::new(cfg, monitor_truncation, &it);
    loop {
        rec.remember(&it);
        match it.advance(cfg.t_max)? {
            Advance::Nonfinite => return Ok(rec.finish(&it, StopReason::Nonfinite)),
            Advance::Stepped(_) => {}
        }
        if let Some(reason) = rec.after_step(&it) {
            return Ok(rec.finish(&it, reason));
        }
    }
}

/// Integrates the system until `max(M_u, M_v) ≥ m_stop`, `t ≥ t_max`, or a
/// fault. Hypotheses are not enforced.
pub fn run_to_blowup(
    params: &SystemParams,
    exps: &Exponents,
    grid: &RadialGrid,
    cfg: &SolverConfig,
) -> Result<RunResult, SolverError> {
    params.validate()?;
    cfg.validate()?;
    check_grid(params, grid)?;
    let it = Integrator::new(
        grid,
        params.n,
        params.boundary,
        system_source(params),
        cfg,
        (exps.theta1, exps.theta2),
        initial_state(params, grid),
    )?;
    drive(it, cfg, monitors_truncation(params))
}

fn monitors_truncation(params: &SystemParams) -> bool {
    params.domain.is_truncated() && params.init.kind != InitKind::Constant
}

/// The scalar equation `u_t = Δu + |∇u|^q + u^p`.
///
/// Dimension, domain, boundary and initial data (`amplitude_u`) come from
/// `setup`; its powers are ignored. `v` mirrors `u` in the result.
pub fn run_scalar(
    p: f64,
    q: f64,
    setup: &SystemParams,
    grid: &RadialGrid,
    cfg: &SolverConfig,
) -> Result<RunResult, SolverError> {
    let params = scalar_params(p, q, setup);
    params.validate()?;
    cfg.validate()?;
    check_grid(&params, grid)?;
    let exps = Exponents::from_powers(p, p, q, q, params.n)?;
    let it = Integrator::new(
        grid,
        params.n,
        params.boundary,
        Source::Scalar {
            p: Power::new(p),
            q: Power::new(q),
        },
        cfg,
        (exps.theta1, exps.theta2),
        initial_state(&params, grid),
    )?;
    drive(it, cfg, monitors_truncation(&params))
}

fn scalar_params(p: f64, q: f64, setup: &SystemParams) -> SystemParams {
    let mut params = *setup;
    params.p1 = p;
    params.p2 = p;
    params.q1 = q;
    params.q2 = q;
    params.init.amplitude_v = params.init.amplitude_u;
    params
}

/// Largest `w` the transformed run may reach (about `e^700`).
pub const TRANSFORM_OVERFLOW: f64 = 1e304;

fn transform_integrator<'g>(
    p: f64,
    setup: &SystemParams,
    grid: &'g RadialGrid,
    cfg: &SolverConfig,
    u0: &[f64],
) -> Result<Integrator<'g>, SolverError> {
    let params = scalar_params(p, 2.0, setup);
    params.validate()?;
    cfg.validate()?;
    check_grid(&params, grid)?;
    let theta = 2.0 / (p + 1.0);
    let w0: Vec<f64> = u0.iter().map(|x| x.exp_m1()).collect();
    Integrator::new(
        grid,
        params.n,
        params.boundary,
        Source::LogTransform { p: Power::new(p) },
        cfg,
        (theta, theta),
        FieldState {
            t: 0.0,
            v: w0.clone(),
            u: w0,
        },
    )
}

/// Integrates `w_t = Δw + (1+w)·log^p(1+w)` from `w0 = e^{u0} − 1`, the
/// image of the `q = 2` scalar equation under `w = e^u − 1`.
///
/// The result is in transformed variables; use [`log1p_profile`] to map a
/// state back. `m_stop` is clipped to [`TRANSFORM_OVERFLOW`].
pub fn transform_oracle(
    p: f64,
    setup: &SystemParams,
    grid: &RadialGrid,
    cfg: &SolverConfig,
    u0: &[f64],
) -> Result<RunResult, SolverError> {
    let mut cfg = *cfg;
    cfg.m_stop = cfg.m_stop.min(TRANSFORM_OVERFLOW);
    let it = transform_integrator(p, setup, grid, &cfg, u0)?;
    drive(it, &cfg, false)
}

pub fn log1p_profile(w: &[f64]) -> Vec<f64> {
    w.iter().map(|x| x.ln_1p()).collect()
}

/// Maps snapshots of a transformed run back to `u = log(1+w)`.
pub fn log1p_snapshots(snapshots: &[Snapshot]) -> Vec<Snapshot> {
    snapshots
        .iter()
        .map(|s| Snapshot {
            state: FieldState {
                t: s.state.t,
                u: log1p_profile(&s.state.u),
                v: log1p_profile(&s.state.v),
            },
            ..s.clone()
        })
        .collect()
}

/// Outcome of running the direct `q = 2` scalar equation side by side with
/// its log-transformed image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformComparison {
    /// `sup |u − log(1+w)|` over the grid and all comparison instants.
    pub sup_diff: f64,
    /// Last compared time.
    pub t_end: f64,
    /// `max u` at the last compared time.
    pub max_u: f64,
    pub checks: usize,
}

/// Compares the direct run with the transformed run while `max u ≤ u_cap`.
///
/// The transformed run is advanced to the direct run's clock every
/// `check_every` direct steps, and whenever `max u` has grown by 1% since
/// the previous comparison.
pub fn compare_with_transform(
    p: f64,
    setup: &SystemParams,
    grid: &RadialGrid,
    cfg: &SolverConfig,
    u_cap: f64,
    check_every: usize,
) -> Result<TransformComparison, SolverError> {
    let params = scalar_params(p, 2.0, setup);
    params.validate()?;
    cfg.validate()?;
    check_grid(&params, grid)?;
    let u0 = initial_state(&params, grid).u;
    let theta = 2.0 / (p + 1.0);
    let mut direct = Integrator::new(
        grid,
        params.n,
        params.boundary,
        Source::Scalar {
            p: Power::new(p),
            q: Power::new(2.0),
        },
        cfg,
        (theta, theta),
        FieldState {
            t: 0.0,
            u: u0.clone(),
            v: u0.clone(),
        },
    )?;
    let mut transformed = transform_integrator(p, setup, grid, cfg, &u0)?;
    let max = |f: &[f64]| f.iter().copied().fold(0.0, f64::max);
    let mut out = TransformComparison {
        sup_diff: 0.0,
        t_end: 0.0,
        max_u: max(&u0),
        checks: 0,
    };
    let every = check_every.max(1);
    let mut steps = 0usize;
    let mut compare = true;
    loop {
        if compare {
            while transformed.state.t < direct.state.t {
                if let Advance::Nonfinite = transformed.advance(direct.state.t)? {
                    return Ok(out);
                }
            }
            let diff = direct
                .state
                .u
                .iter()
                .zip(&transformed.state.u)
                .map(|(u, w)| (u - w.ln_1p()).abs())
                .fold(0.0, f64::max);
            out.sup_diff = out.sup_diff.max(diff);
            out.t_end = direct.state.t;
            out.max_u = max(&direct.state.u);
            out.checks += 1;
        }
        if direct.state.t >= cfg.t_max {
            return Ok(out);
        }
        if let Advance::Nonfinite = direct.advance(cfg.t_max)? {
            return Ok(out);
        }
        steps += 1;
        let peak = max(&direct.state.u);
        if peak > u_cap {
            return Ok(out);
        }
        compare = steps.is_multiple_of(every) || peak > out.max_u * 1.01;
    }
}

/// Integrates the system with an added source `forcing(r, t) -> (f_u, f_v)`
/// up to `t_end`; used for manufactured-solution tests.
pub fn integrate_forced(
    params: &SystemParams,
    grid: &RadialGrid,
    cfg: &SolverConfig,
    initial: FieldState,
    t_end: f64,
    forcing: &dyn Fn(f64, f64) -> (f64, f64),
) -> Result<FieldState, SolverError> {
    params.validate()?;
    cfg.validate()?;
    let exps = Exponents::from_powers(params.p1, params.p2, params.q1, params.q2, params.n)?;
    let mut it = Integrator::new(
        grid,
        params.n,
        params.boundary,
        system_source(params),
        cfg,
        (exps.theta1, exps.theta2),
        initial,
    )?
    .with_forcing(forcing);
    while it.state.t < t_end {
        if let Advance::Nonfinite = it.advance(t_end)? {
            return Err(SolverError::Nonfinite(it.state.t));
        }
    }
    Ok(it.state)
}

/// Integrates the unforced system from its configured initial data to
/// `t_end`.
pub fn integrate_to(
    params: &SystemParams,
    grid: &RadialGrid,
    cfg: &SolverConfig,
    t_end: f64,
) -> Result<FieldState, SolverError> {
    check_grid(params, grid)?;
    integrate_forced(
        params,
        grid,
        cfg,
        initial_state(params, grid),
        t_end,
        &|_, _| (0.0, 0.0),
    )
}

/// The diffusive step bound `safety·h²/(2n)` for a grid.
pub fn diffusive_dt(grid: &RadialGrid, n: usize, cfg: &SolverConfig) -> f64 {
    cfg.safety * grid.h() * grid.h() / (2.0 * n as f64)
}

/// Neumann boundary with constant data: the PDE collapses onto
/// `u' = v^p1, v' = u^p2`.
pub fn is_homogeneous(params: &SystemParams) -> bool {
    params.boundary == Boundary::Neumann && params.init.kind == InitKind::Constant
}

#[cfg(test)]
mod tests;
