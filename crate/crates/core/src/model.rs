//! Problem parameters, derived exponents and the hypothesis check.
//!
//! The simulated system is
//!
//! ```text
//! u_t = Δu + |∇u|^q1 + v^p1
//! v_t = Δv + |∇v|^q2 + u^p2
//! ```
//!
//! on a ball (homogeneous Dirichlet data) or on a truncated copy of the
//! whole space, with nonnegative radially nonincreasing initial data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::RadialGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} = {value} must exceed 1 (p_1,p_2∈(1,∞))")]
    ReactionPower { name: &'static str, value: f64 },
    #[error("{name} = {value} must lie in (1,2] (q_1,q_2∈(1,2])")]
    GradientPower { name: &'static str, value: f64 },
    #[error("dimension n must be at least 1")]
    Dimension,
    #[error("domain radius must be positive and finite, got {0}")]
    Radius(f64),
    #[error("neumann boundary is only permitted in truncated-space mode")]
    NeumannOnBall,
    #[error("constant initial data requires the neumann boundary")]
    ConstantNeedsNeumann,
    #[error("initial amplitudes must be finite and nonnegative, got u: {0}, v: {1}")]
    Amplitude(f64, f64),
    #[error("initial width must be positive and finite, got {0}")]
    Width(f64),
    #[error("cosine bump width {width} exceeds the ball radius {radius}")]
    BumpTooWide { width: f64, radius: f64 },
    #[error(
        "gaussian data is not negligible at the truncation radius \
         (exp(-R²/w²) = {ratio:e} ≥ 1e-12); enlarge the radius or shrink the width"
    )]
    TruncationTooSmall { ratio: f64 },
    #[error("p1·p2 = {0} must exceed 1")]
    DegenerateProduct(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Ball { radius: f64 },
    TruncatedSpace { radius: f64 },
}

impl Domain {
    pub fn radius(&self) -> f64 {
        match *self {
            Domain::Ball { radius } | Domain::TruncatedSpace { radius } => radius,
        }
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self, Domain::TruncatedSpace { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitKind {
    Gaussian,
    CosineBump,
    Constant,
}

/// Initial data description shared by both components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub kind: InitKind,
    pub amplitude_u: f64,
    pub amplitude_v: f64,
    /// Gaussian e-folding width, or the support radius of the cosine bump.
    pub width: f64,
}

impl InitSpec {
    /// Radial profile with unit peak at `r`.
    ///
    /// Gaussians on a Dirichlet ball are shifted and rescaled so that they
    /// vanish exactly at `r = R` while keeping the unit peak.
    fn shape(&self, r: f64, radius: f64, boundary: Boundary) -> f64 {
        match self.kind {
            InitKind::Constant => 1.0,
            InitKind::CosineBump => {
                if r >= self.width {
                    0.0
                } else {
                    (std::f64::consts::FRAC_PI_2 * r / self.width)
                        .cos()
                        .max(0.0)
                }
            }
            InitKind::Gaussian => {
                let g = (-(r * r) / (self.width * self.width)).exp();
                if boundary == Boundary::Dirichlet {
                    let floor = (-(radius * radius) / (self.width * self.width)).exp();
                    ((g - floor) / (1.0 - floor)).max(0.0)
                } else {
                    g
                }
            }
        }
    }

    /// Samples `(u0, v0)` on the grid.
    pub fn sample(&self, grid: &RadialGrid, boundary: Boundary) -> (Vec<f64>, Vec<f64>) {
        let radius = grid.radius();
        let shape: Vec<f64> = grid
            .coords()
            .map(|r| self.shape(r, radius, boundary))
            .collect();
        let mut u: Vec<f64> = shape.iter().map(|s| self.amplitude_u * s).collect();
        let mut v: Vec<f64> = shape.iter().map(|s| self.amplitude_v * s).collect();
        if boundary == Boundary::Dirichlet {
            let last = grid.len() - 1;
            u[last] = 0.0;
            v[last] = 0.0;
        }
        (u, v)
    }
}

/// The exponents `(p1, p2, q1, q2)`, the dimension, domain and initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub p1: f64,
    pub p2: f64,
    pub q1: f64,
    pub q2: f64,
    pub n: usize,
    pub domain: Domain,
    pub boundary: Boundary,
    pub init: InitSpec,
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("p1", self.p1), ("p2", self.p2)] {
            if !(value > 1.0 && value.is_finite()) {
                return Err(ModelError::ReactionPower { name, value });
            }
        }
        for (name, value) in [("q1", self.q1), ("q2", self.q2)] {
            if !(value > 1.0 && value <= 2.0) {
                return Err(ModelError::GradientPower { name, value });
            }
        }
        if self.n == 0 {
            return Err(ModelError::Dimension);
        }
        let radius = self.domain.radius();
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(ModelError::Radius(radius));
        }
        if self.boundary == Boundary::Neumann && !self.domain.is_truncated() {
            return Err(ModelError::NeumannOnBall);
        }
        let init = &self.init;
        if init.kind == InitKind::Constant && self.boundary != Boundary::Neumann {
            return Err(ModelError::ConstantNeedsNeumann);
        }
        let amp_ok = |a: f64| a.is_finite() && a >= 0.0;
        if !amp_ok(init.amplitude_u) || !amp_ok(init.amplitude_v) {
            return Err(ModelError::Amplitude(init.amplitude_u, init.amplitude_v));
        }
        if init.kind != InitKind::Constant {
            if !(init.width > 0.0 && init.width.is_finite()) {
                return Err(ModelError::Width(init.width));
            }
            if init.kind == InitKind::CosineBump && init.width > radius {
                return Err(ModelError::BumpTooWide {
                    width: init.width,
                    radius,
                });
            }
            if init.kind == InitKind::Gaussian && self.domain.is_truncated() {
                let ratio = (-(radius * radius) / (init.width * init.width)).exp();
                if ratio >= 1e-12 {
                    return Err(ModelError::TruncationTooSmall { ratio });
                }
            }
        }
        Ok(())
    }

    /// True when the system collapses onto the scalar equation: equal
    /// powers and identical initial data for both components.
    pub fn is_symmetric(&self) -> bool {
        self.p1 == self.p2 && self.q1 == self.q2 && self.init.amplitude_u == self.init.amplitude_v
    }
}

/// Closed-form constants attached to a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    /// Rate exponent of `u`: `(p1+1)/(p1·p2−1)`.
    pub alpha: f64,
    /// Rate exponent of `v`: `(p2+1)/(p1·p2−1)`.
    pub beta: f64,
    /// Weight of the gradient term after rescaling `u`: `2α+2−(2α+1)q1`.
    pub mu1: f64,
    pub mu2: f64,
    /// Power applied to `|∇u|` in the sup-functional: `2(p1+1)/(p1·p2+2p1+1)`.
    pub theta1: f64,
    pub theta2: f64,
    /// `(2α+2)/(2α+1)`; `q1` must stay strictly below it.
    pub q1_bound: f64,
    pub q2_bound: f64,
    /// `max{α, β} ≥ n/2`.
    pub cond_fujita: bool,
    /// `q1 < q1_bound` and `q2 < q2_bound`.
    pub cond_q: bool,
}

impl Exponents {
    pub fn from_powers(p1: f64, p2: f64, q1: f64, q2: f64, n: usize) -> Result<Self, ModelError> {
        let prod = p1 * p2;
        if !(prod > 1.0) {
            return Err(ModelError::DegenerateProduct(prod));
        }
        let denom = prod - 1.0;
        let alpha = (p1 + 1.0) / denom;
        let beta = (p2 + 1.0) / denom;
        let theta1 = 2.0 * (p1 + 1.0) / (prod + 2.0 * p1 + 1.0);
        let theta2 = 2.0 * (p2 + 1.0) / (prod + 2.0 * p2 + 1.0);
        let q1_bound = (2.0 * alpha + 2.0) / (2.0 * alpha + 1.0);
        let q2_bound = (2.0 * beta + 2.0) / (2.0 * beta + 1.0);
        Ok(Exponents {
            alpha,
            beta,
            mu1: 2.0 * alpha + 2.0 - (2.0 * alpha + 1.0) * q1,
            mu2: 2.0 * beta + 2.0 - (2.0 * beta + 1.0) * q2,
            theta1,
            theta2,
            q1_bound,
            q2_bound,
            cond_fujita: alpha.max(beta) >= n as f64 / 2.0,
            cond_q: q1 < q1_bound && q2 < q2_bound,
        })
    }
}

pub fn compute_exponents(params: &SystemParams) -> Result<Exponents, ModelError> {
    Exponents::from_powers(params.p1, params.p2, params.q1, params.q2, params.n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub cond_fujita: bool,
    pub cond_q: bool,
    /// `q1_bound − q1`; positive when the gradient condition holds for `u`.
    pub q1_margin: f64,
    pub q2_margin: f64,
    /// `max{α, β} − n/2`.
    pub fujita_margin: f64,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.cond_fujita && self.cond_q
    }
}

pub fn check_theorem_hypotheses(params: &SystemParams) -> Result<HypothesisReport, ModelError> {
    let e = compute_exponents(params)?;
    Ok(HypothesisReport {
        cond_fujita: e.cond_fujita,
        cond_q: e.cond_q,
        q1_margin: e.q1_bound - params.q1,
        q2_margin: e.q2_bound - params.q2,
        fujita_margin: e.alpha.max(e.beta) - params.n as f64 / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(p1: f64, p2: f64, q1: f64, q2: f64, n: usize) -> SystemParams {
        SystemParams {
            p1,
            p2,
            q1,
            q2,
            n,
            domain: Domain::Ball { radius: 1.0 },
            boundary: Boundary::Dirichlet,
            init: InitSpec {
                kind: InitKind::Gaussian,
                amplitude_u: 20.0,
                amplitude_v: 20.0,
                width: 0.3,
            },
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn exponents_for_two_three() {
        let e = compute_exponents(&params(2.0, 3.0, 1.2, 1.2, 1)).unwrap();
        assert!(close(e.alpha, 0.6));
        assert!(close(e.beta, 0.8));
        assert!(close(e.theta1, 6.0 / 11.0));
        assert!(close(e.theta2, 8.0 / 13.0));
        assert!(close(e.q1_bound, 16.0 / 11.0));
        assert!(close(e.mu1, 3.2 - 2.2 * 1.2));
        assert!(e.mu1 > 0.0);
        assert!(e.cond_fujita);
    }

    #[test]
    fn symmetric_powers_reduce() {
        for p in [1.1, 1.5, 2.0, 3.0, 7.25] {
            let e = compute_exponents(&params(p, p, 1.5, 1.5, 1)).unwrap();
            assert!(close(e.alpha, 1.0 / (p - 1.0)));
            assert!(close(e.beta, e.alpha));
            assert!(close(e.theta1, 2.0 / (p + 1.0)));
            assert!(close(e.theta2, e.theta1));
        }
    }

    #[test]
    fn fujita_fails_in_three_dimensions() {
        let r = check_theorem_hypotheses(&params(2.0, 2.0, 1.2, 1.2, 3)).unwrap();
        assert!(!r.cond_fujita);
        assert!(close(r.fujita_margin, -0.5));
        assert!(!r.holds());
    }

    #[test]
    fn theorem_regime_holds() {
        // Independent arithmetic: α = 3/5, β = 4/5; bounds 16/11 and 18/13.
        let r = check_theorem_hypotheses(&params(2.0, 3.0, 1.2, 1.2, 1)).unwrap();
        assert!(r.holds());
        assert!(close(r.q1_margin, 16.0 / 11.0 - 1.2));
        assert!(close(r.q2_margin, 18.0 / 13.0 - 1.2));
        assert!(close(r.fujita_margin, 0.8 - 0.5));
    }

    #[test]
    fn gradient_condition_fails_above_bound() {
        let r = check_theorem_hypotheses(&params(2.0, 3.0, 1.5, 1.2, 1)).unwrap();
        assert!(!r.cond_q);
        assert!(r.q1_margin < 0.0);
    }

    #[test]
    fn equality_reports_false_with_zero_margin() {
        let e = compute_exponents(&params(2.0, 3.0, 1.2, 1.2, 1)).unwrap();
        let r = check_theorem_hypotheses(&params(2.0, 3.0, e.q1_bound, 1.2, 1)).unwrap();
        assert!(!r.cond_q);
        assert_eq!(r.q1_margin, 0.0);
        // Non-strict for the dimension condition: α = β = 1 = n/2 at n = 2.
        let r = check_theorem_hypotheses(&params(2.0, 2.0, 1.2, 1.2, 2)).unwrap();
        assert!(r.cond_fujita);
        assert_eq!(r.fujita_margin, 0.0);
    }

    #[test]
    fn rejects_out_of_range_powers() {
        assert!(matches!(
            params(1.0, 3.0, 1.2, 1.2, 1).validate(),
            Err(ModelError::ReactionPower { name: "p1", .. })
        ));
        let err = params(2.0, 3.0, 2.5, 1.2, 1).validate().unwrap_err();
        assert!(err.to_string().contains("(1,2]"));
        assert!(params(2.0, 3.0, 2.0, 1.0, 1).validate().is_err());
        assert!(params(2.0, 3.0, 2.0, 2.0, 0).validate().is_err());
        assert!(Exponents::from_powers(0.5, 1.5, 1.2, 1.2, 1).is_err());
    }

    #[test]
    fn boundary_and_init_compatibility() {
        let mut p = params(2.0, 2.0, 1.2, 1.2, 1);
        p.boundary = Boundary::Neumann;
        assert_eq!(p.validate(), Err(ModelError::NeumannOnBall));
        p.domain = Domain::TruncatedSpace { radius: 10.0 };
        p.validate().unwrap();
        p.boundary = Boundary::Dirichlet;
        p.init.kind = InitKind::Constant;
        assert_eq!(p.validate(), Err(ModelError::ConstantNeedsNeumann));
        p.init.kind = InitKind::Gaussian;
        p.domain = Domain::TruncatedSpace { radius: 1.0 };
        assert!(matches!(
            p.validate(),
            Err(ModelError::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn dirichlet_gaussian_vanishes_at_boundary() {
        let p = params(2.0, 2.0, 1.2, 1.2, 1);
        let grid = RadialGrid::new(101, 1.0).unwrap();
        let (u, v) = p.init.sample(&grid, p.boundary);
        assert_eq!(u[0], 20.0);
        assert_eq!(*u.last().unwrap(), 0.0);
        assert_eq!(*v.last().unwrap(), 0.0);
        assert!(u.windows(2).all(|w| w[1] <= w[0]));
        assert!(u.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn cosine_bump_vanishes_at_its_support() {
        let mut p = params(2.0, 2.0, 1.2, 1.2, 1);
        p.init.kind = InitKind::CosineBump;
        p.init.width = 1.0;
        let grid = RadialGrid::new(11, 1.0).unwrap();
        let (u, _) = p.init.sample(&grid, p.boundary);
        assert_eq!(u[10], 0.0);
        assert!((u[5] - 20.0 * (std::f64::consts::PI / 4.0).cos()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn closed_form_identities(p1 in 1.001f64..10.0, p2 in 1.001f64..10.0,
                                  q1 in 1.001f64..2.0, q2 in 1.001f64..2.0, n in 1usize..5) {
            let e = Exponents::from_powers(p1, p2, q1, q2, n).unwrap();
            let prod = p1 * p2;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            prop_assert!(rel(e.alpha * (prod - 1.0), p1 + 1.0) <= 1e-12);
            prop_assert!(rel(e.beta * (prod - 1.0), p2 + 1.0) <= 1e-12);
            prop_assert!(rel(e.theta1 * (prod + 2.0 * p1 + 1.0), 2.0 * (p1 + 1.0)) <= 1e-12);
            prop_assert!(rel(e.theta2 * (prod + 2.0 * p2 + 1.0), 2.0 * (p2 + 1.0)) <= 1e-12);
            prop_assert!(e.theta1 > 0.0 && e.theta1 < 1.0);
            prop_assert!(e.theta2 > 0.0 && e.theta2 < 1.0);
            prop_assert_eq!(e.cond_q, e.mu1 > 0.0 && e.mu2 > 0.0);

            let s = Exponents::from_powers(p2, p1, q2, q1, n).unwrap();
            prop_assert!(rel(s.alpha, e.beta) <= 1e-14);
            prop_assert!(rel(s.theta1, e.theta2) <= 1e-14);
            prop_assert!((s.mu1 - e.mu2).abs() <= 1e-12);
        }
    }
}
