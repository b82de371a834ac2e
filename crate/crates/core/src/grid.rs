//! Radial discretization and the discrete operators.
//!
//! All profiles are functions of `r = |x|` sampled at `r_i = i·h`. The
//! `n`-dimensional Laplacian becomes `f'' + (n−1)/r·f'`; at the origin the
//! symmetry limit `n·f''(0)` is used instead of evaluating `1/r`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Exponents;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("grid radius must be positive and finite, got {0}")]
    Radius(f64),
    #[error("array length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: usize,
    h: f64,
    radius: f64,
}

impl RadialGrid {
    pub fn new(nodes: usize, radius: f64) -> Result<Self, GridError> {
        if nodes < 3 {
            return Err(GridError::TooFewNodes(nodes));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GridError::Radius(radius));
        }
        Ok(RadialGrid {
            nodes,
            h: radius / (nodes - 1) as f64,
            radius,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Node coordinate; the last node sits exactly on the radius.
    pub fn r(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.radius
        } else {
            i as f64 * self.h
        }
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes).map(|i| self.r(i))
    }

    fn check(&self, f: &[f64]) -> Result<(), GridError> {
        if f.len() != self.nodes {
            return Err(GridError::LengthMismatch {
                expected: self.nodes,
                got: f.len(),
            });
        }
        Ok(())
    }
}

/// Discrete radial profiles of both components at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldState {
    pub fn zeros(t: f64, n: usize) -> Self {
        FieldState {
            t,
            u: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

pub fn radial_laplacian(grid: &RadialGrid, f: &[f64], n: usize) -> Result<Vec<f64>, GridError> {
    grid.check(f)?;
    let mut out = vec![0.0; f.len()];
    laplacian_into(grid, f, n, &mut out);
    Ok(out)
}

/// Fills `out` with the radial Laplacian. The last entry is zeroed; the
/// boundary condition decides it.
pub(crate) fn laplacian_into(grid: &RadialGrid, f: &[f64], n: usize, out: &mut [f64]) {
    let h = grid.h;
    let inv_h2 = 1.0 / (h * h);
    let last = f.len() - 1;
    let curv = (n - 1) as f64;
    out[0] = 2.0 * n as f64 * (f[1] - f[0]) * inv_h2;
    for i in 1..last {
        let second = (f[i + 1] - 2.0 * f[i] + f[i - 1]) * inv_h2;
        let first = (f[i + 1] - f[i - 1]) / (2.0 * h);
        out[i] = second + curv / (i as f64 * h) * first;
    }
    out[last] = 0.0;
}

pub fn gradient_magnitude(grid: &RadialGrid, f: &[f64]) -> Result<Vec<f64>, GridError> {
    grid.check(f)?;
    let mut out = vec![0.0; f.len()];
    gradient_into(grid, f, &mut out);
    Ok(out)
}

pub(crate) fn gradient_into(grid: &RadialGrid, f: &[f64], out: &mut [f64]) {
    let inv_2h = 0.5 / grid.h;
    let last = f.len() - 1;
    out[0] = 0.0;
    for i in 1..last {
        out[i] = ((f[i + 1] - f[i - 1]) * inv_2h).abs();
    }
    out[last] = ((3.0 * f[last] - 4.0 * f[last - 1] + f[last - 2]) * inv_2h).abs();
}

/// `max_i (f_i + g_i^θ)` together with its node index.
pub(crate) fn functional_max(f: &[f64], grad: &[f64], theta: f64) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, (&fi, &gi)) in f.iter().zip(grad).enumerate() {
        let val = fi + gi.powf(theta);
        if val > best {
            best = val;
            arg = i;
        }
    }
    (best, arg)
}

/// Instantaneous sup over the nodes of `u + |∇u|^θ1` and `v + |∇v|^θ2`.
///
/// The running-in-time sup is accumulated by the solver.
pub fn sup_functional(state: &FieldState, grid: &RadialGrid, exps: &Exponents) -> (f64, f64) {
    let gu = gradient_magnitude(grid, &state.u).expect("state matches grid");
    let gv = gradient_magnitude(grid, &state.v).expect("state matches grid");
    (
        functional_max(&state.u, &gu, exps.theta1).0,
        functional_max(&state.v, &gv, exps.theta2).0,
    )
}
