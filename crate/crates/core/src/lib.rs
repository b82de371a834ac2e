//! Finite-time blow-up laboratory for the reaction-diffusion system with
//! gradient terms
//!
//! ```text
//! u_t = Δu + |∇u|^q1 + v^p1,   v_t = Δv + |∇v|^q2 + u^p2.
//! ```
//!
//! [`model`] holds parameters and the closed-form exponents, [`grid`] the
//! radial discretization, [`solver`] the explicit integrator, [`analysis`]
//! the rate, doubling, ratio, rescaling and blow-up-set diagnostics, and
//! [`io`] configuration, manifests, CSV and SVG output. [`pipeline`] ties
//! them into the commands of the `blowlab` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod grid;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod solver;

pub use analysis::{BlowupEstimate, DoublingReport, RateFit, RescaledFrame};
pub use grid::{FieldState, RadialGrid};
pub use io::{Resolved, RunConfig, RunManifest};
pub use model::{
    check_theorem_hypotheses, compute_exponents, Boundary, Domain, Exponents, HypothesisReport,
    InitKind, InitSpec, SystemParams,
};
pub use pipeline::{PipelineError, Thresholds, Verdict};
pub use solver::{RunResult, SolverConfig, StopReason, SupNormSeries};
