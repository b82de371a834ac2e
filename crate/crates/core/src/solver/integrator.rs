use crate::grid::{functional_max, gradient_into, laplacian_into, FieldState, RadialGrid};
use crate::model::Boundary;

use super::{SolverConfig, SolverError};

/// Round-off negativity below `-NEG_TOL · sup` is a scheme fault.
pub(crate) const NEG_TOL: f64 = 1e-13;

/// A power `x^e` for `x ≥ 0`, specialized for the exponents that show up in
/// practice so the hot loop avoids `powf` where it can.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Power {
    Int(i32),
    /// `x^(k + 1/2)`.
    HalfInt(i32),
    Real(f64),
}

impl Power {
    pub(crate) fn new(e: f64) -> Self {
        if e.fract() == 0.0 && e.abs() < 64.0 {
            Power::Int(e as i32)
        } else if (e - 0.5).fract() == 0.0 && e.abs() < 64.0 {
            Power::HalfInt((e - 0.5) as i32)
        } else {
            Power::Real(e)
        }
    }

    #[inline]
    pub(crate) fn eval(self, x: f64) -> f64 {
        match self {
            Power::Int(k) => x.powi(k),
            Power::HalfInt(k) => x.powi(k) * x.sqrt(),
            Power::Real(e) => x.powf(e),
        }
    }
}

/// Right-hand side nonlinearity.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Source {
    /// `|∇u|^q1 + v^p1`, `|∇v|^q2 + u^p2`.
    System {
        p1: Power,
        p2: Power,
        q1: Power,
        q2: Power,
    },
    /// `|∇u|^q + u^p`; `v` mirrors `u`.
    Scalar { p: Power, q: Power },
    /// `(1+w)·log^p(1+w)`; `v` mirrors `u`.
    LogTransform { p: Power },
}

impl Source {
    fn single_field(&self) -> bool {
        !matches!(self, Source::System { .. })
    }
}

pub(crate) type Forcing<'f> = &'f dyn Fn(f64, f64) -> (f64, f64);

pub(crate) enum Advance {
    Stepped(f64),
    Nonfinite,
}

/// Explicit Euler integrator holding the current state and the scratch
/// buffers of one run.
pub(crate) struct Integrator<'g> {
    grid: &'g RadialGrid,
    dim: usize,
    boundary: Boundary,
    source: Source,
    reaction_cap: f64,
    theta: (f64, f64),
    dt_diffusive: f64,
    forcing: Option<Forcing<'g>>,

    pub(crate) state: FieldState,
    pub(crate) grad_u: Vec<f64>,
    pub(crate) grad_v: Vec<f64>,
    /// Instantaneous sup-functionals of the current state.
    pub(crate) m_inst: (f64, f64),
    pub(crate) argmax_u: usize,

    lap_u: Vec<f64>,
    lap_v: Vec<f64>,
    rhs_u: Vec<f64>,
    rhs_v: Vec<f64>,
    next: FieldState,
    next_grad_u: Vec<f64>,
    next_grad_v: Vec<f64>,
}

impl<'g> Integrator<'g> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        grid: &'g RadialGrid,
        dim: usize,
        boundary: Boundary,
        source: Source,
        cfg: &SolverConfig,
        theta: (f64, f64),
        initial: FieldState,
    ) -> Result<Self, SolverError> {
        let len = grid.len();
        if initial.u.len() != len || initial.v.len() != len {
            return Err(SolverError::Config(format!(
                "initial state has {} / {} entries, grid has {len}",
                initial.u.len(),
                initial.v.len()
            )));
        }
        let h = grid.h();
        let mut it = Integrator {
            grid,
            dim,
            boundary,
            source,
            reaction_cap: cfg.reaction_cap,
            theta,
            dt_diffusive: cfg.safety * h * h / (2.0 * dim as f64),
            forcing: None,
            next: initial.clone(),
            state: initial,
            grad_u: vec![0.0; len],
            grad_v: vec![0.0; len],
            m_inst: (0.0, 0.0),
            argmax_u: 0,
            lap_u: vec![0.0; len],
            lap_v: vec![0.0; len],
            rhs_u: vec![0.0; len],
            rhs_v: vec![0.0; len],
            next_grad_u: vec![0.0; len],
            next_grad_v: vec![0.0; len],
        };
        if it.source.single_field() {
            it.state.v.copy_from_slice(&it.state.u);
        }
        it.enforce_boundary_on_state();
        let (gu, gv, m, arg) = it.measure(&it.state);
        it.grad_u = gu;
        it.grad_v = gv;
        it.m_inst = m;
        it.argmax_u = arg;
        Ok(it)
    }

    pub(crate) fn with_forcing(mut self, forcing: Forcing<'g>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    #[cfg(test)]
    pub(crate) fn dt_diffusive(&self) -> f64 {
        self.dt_diffusive
    }

    fn enforce_boundary_on_state(&mut self) {
        if self.boundary == Boundary::Dirichlet {
            let last = self.grid.len() - 1;
            self.state.u[last] = 0.0;
            self.state.v[last] = 0.0;
        }
    }

    fn fill_gradients(&self, f: &[f64], out: &mut [f64]) {
        gradient_into(self.grid, f, out);
        if self.boundary == Boundary::Neumann {
            let last = out.len() - 1;
            out[last] = 0.0;
        }
    }

    #[allow(clippy::type_complexity)]
    fn measure(&self, state: &FieldState) -> (Vec<f64>, Vec<f64>, (f64, f64), usize) {
        let len = self.grid.len();
        let mut gu = vec![0.0; len];
        let mut gv = vec![0.0; len];
        self.fill_gradients(&state.u, &mut gu);
        self.fill_gradients(&state.v, &mut gv);
        let (mu, arg) = functional_max(&state.u, &gu, self.theta.0);
        let mv = functional_max(&state.v, &gv, self.theta.1).0;
        (gu, gv, (mu, mv), arg)
    }

    fn compute_rhs(&mut self) {
        let single = self.source.single_field();
        let len = self.grid.len();
        let last = len - 1;
        let h = self.grid.h();
        laplacian_into(self.grid, &self.state.u, self.dim, &mut self.lap_u);
        if !single {
            laplacian_into(self.grid, &self.state.v, self.dim, &mut self.lap_v);
        }
        if self.boundary == Boundary::Neumann {
            // Mirror ghost node: f_N = f_{N-2}.
            let inv_h2 = 1.0 / (h * h);
            let u = &self.state.u;
            let v = &self.state.v;
            self.lap_u[last] = 2.0 * (u[last - 1] - u[last]) * inv_h2;
            self.lap_v[last] = 2.0 * (v[last - 1] - v[last]) * inv_h2;
        }
        let (u, v) = (&self.state.u, &self.state.v);
        match self.source {
            Source::System { p1, p2, q1, q2 } => {
                for i in 0..len {
                    self.rhs_u[i] = self.lap_u[i] + q1.eval(self.grad_u[i]) + p1.eval(v[i]);
                    self.rhs_v[i] = self.lap_v[i] + q2.eval(self.grad_v[i]) + p2.eval(u[i]);
                }
            }
            Source::Scalar { p, q } => {
                for (i, ui) in u.iter().enumerate().take(len) {
                    self.rhs_u[i] = self.lap_u[i] + q.eval(self.grad_u[i]) + p.eval(*ui);
                }
            }
            Source::LogTransform { p } => {
                for (i, ui) in u.iter().enumerate().take(len) {
                    self.rhs_u[i] = self.lap_u[i] + (1.0 + ui) * p.eval(ui.ln_1p());
                }
            }
        }
        if let Some(force) = self.forcing {
            let t = self.state.t;
            for i in 0..len {
                let (fu, fv) = force(self.grid.r(i), t);
                self.rhs_u[i] += fu;
                if !single {
                    self.rhs_v[i] += fv;
                }
            }
        }
        if self.boundary == Boundary::Dirichlet {
            self.rhs_u[last] = 0.0;
            self.rhs_v[last] = 0.0;
        }
    }

    /// Time step from the diffusive limit and the reaction growth cap.
    fn choose_dt(&self) -> f64 {
        let mut dt = self.dt_diffusive;
        let single = self.source.single_field();
        let cap = |f: &[f64], rhs: &[f64]| {
            let peak = f.iter().copied().fold(0.0, f64::max);
            let growth = rhs.iter().copied().fold(0.0, f64::max);
            if peak > 0.0 && growth > 0.0 {
                self.reaction_cap * peak / growth
            } else {
                f64::INFINITY
            }
        };
        dt = dt.min(cap(&self.state.u, &self.rhs_u));
        if !single {
            dt = dt.min(cap(&self.state.v, &self.rhs_v));
        }
        dt
    }

    pub(crate) fn sup(&self) -> f64 {
        let mu = self.state.u.iter().copied().fold(0.0, f64::max);
        let mv = self.state.v.iter().copied().fold(0.0, f64::max);
        mu.max(mv)
    }

    /// Writes `state + dt·rhs` into `next`, clamping round-off negativity.
    /// Returns `Ok(false)` if a nonfinite value appeared.
    fn trial(&mut self, dt: f64) -> Result<bool, SolverError> {
        let single = self.source.single_field();
        let floor = -NEG_TOL * self.sup();
        let t = self.state.t;
        let apply = |cur: &[f64], rhs: &[f64], out: &mut [f64]| -> Result<bool, SolverError> {
            for i in 0..cur.len() {
                let x = cur[i] + dt * rhs[i];
                if !x.is_finite() {
                    return Ok(false);
                }
                if x < 0.0 {
                    if x < floor {
                        return Err(SolverError::Negativity {
                            t,
                            index: i,
                            value: x,
                        });
                    }
                    out[i] = 0.0;
                } else {
                    out[i] = x;
                }
            }
            Ok(true)
        };
        if !apply(&self.state.u, &self.rhs_u, &mut self.next.u)? {
            return Ok(false);
        }
        if single {
            self.next.v.copy_from_slice(&self.next.u);
        } else if !apply(&self.state.v, &self.rhs_v, &mut self.next.v)? {
            return Ok(false);
        }
        if self.boundary == Boundary::Dirichlet {
            let last = self.grid.len() - 1;
            self.next.u[last] = 0.0;
            self.next.v[last] = 0.0;
        }
        Ok(true)
    }

    /// One explicit Euler step, never past `t_limit`.
    ///
    /// The step is halved while either sup-functional would grow by more
    /// than the reaction cap.
    pub(crate) fn advance(&mut self, t_limit: f64) -> Result<Advance, SolverError> {
        self.compute_rhs();
        let remaining = t_limit - self.state.t;
        let mut dt = self.choose_dt();
        let lands = dt >= remaining;
        if lands {
            dt = remaining;
        }
        let (mu0, mv0) = self.m_inst;
        let limit = 1.0 + self.reaction_cap * (1.0 + 1e-9);
        let single = self.source.single_field();
        let mut halvings = 0;
        loop {
            if !self.trial(dt)? {
                return Ok(Advance::Nonfinite);
            }
            let mut ngu = std::mem::take(&mut self.next_grad_u);
            let mut ngv = std::mem::take(&mut self.next_grad_v);
            self.fill_gradients(&self.next.u, &mut ngu);
            if single {
                ngv.copy_from_slice(&ngu);
            } else {
                self.fill_gradients(&self.next.v, &mut ngv);
            }
            let (mu, arg) = functional_max(&self.next.u, &ngu, self.theta.0);
            let mv = if single && self.theta.0 == self.theta.1 {
                mu
            } else {
                functional_max(&self.next.v, &ngv, self.theta.1).0
            };
            self.next_grad_u = ngu;
            self.next_grad_v = ngv;
            let too_fast = (mu0 > 0.0 && mu > limit * mu0) || (mv0 > 0.0 && mv > limit * mv0);
            if too_fast && halvings < 60 {
                dt *= 0.5;
                halvings += 1;
                continue;
            }
            if !mu.is_finite() || !mv.is_finite() {
                return Ok(Advance::Nonfinite);
            }
            self.next.t = if lands && halvings == 0 {
                t_limit
            } else {
                self.state.t + dt
            };
            std::mem::swap(&mut self.state, &mut self.next);
            std::mem::swap(&mut self.grad_u, &mut self.next_grad_u);
            std::mem::swap(&mut self.grad_v, &mut self.next_grad_v);
            self.m_inst = (mu, mv);
            self.argmax_u = arg;
            return Ok(Advance::Stepped(dt));
        }
    }

    pub(crate) fn max_grads(&self) -> (f64, f64) {
        let m = |g: &[f64]| g.iter().copied().fold(0.0, f64::max);
        (m(&self.grad_u), m(&self.grad_v))
    }

    pub(crate) fn grid(&self) -> &RadialGrid {
        self.grid
    }
}
