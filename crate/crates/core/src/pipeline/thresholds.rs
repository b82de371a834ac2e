use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Verdict tolerances. The asymptotic statements being tested carry no
/// finite-resolution tolerance of their own, so every cut is an
/// engineering choice collected here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub exponent_tol: f64,
    pub product_factor: f64,
    pub ratio_spread: f64,
    pub symmetric_phi_tol: f64,
    pub doubling_ratio_tol: f64,
    pub doubling_tail: f64,
    pub rescale_sup: f64,
    pub rescale_center: f64,
    pub ode_time_tol: f64,
    pub ode_exponent_tol: f64,
    pub ode_ratio_tol: f64,
    pub transform_tol: f64,
    pub transform_refinement: f64,
    pub single_point_width: f64,
    pub global_width: f64,
}

/// `(name, default, meaning)` for every threshold.
pub const THRESHOLD_TABLE: [(&str, f64, &str); 15] = [
    (
        "exponent_tol",
        0.15,
        "relative error allowed between fitted and predicted rate exponents",
    ),
    (
        "product_factor",
        3.0,
        "gradient-channel product must stay within this factor of its median",
    ),
    (
        "ratio_spread",
        10.0,
        "largest admissible phi_max/phi_min for M_u^{-1/2α}·M_v^{1/2β}",
    ),
    (
        "symmetric_phi_tol",
        1e-10,
        "deviation of phi from 1 allowed on symmetric runs",
    ),
    (
        "doubling_ratio_tol",
        0.25,
        "relative error of the last-5 doubling ratio against 2^{-1/α}",
    ),
    (
        "doubling_tail",
        8.0,
        "number of trailing D_j checked for monotone divergence",
    ),
    (
        "rescale_sup",
        1.05,
        "upper bound for sup(φ1 + |∇φ1|^θ1) on a rescaled frame",
    ),
    (
        "rescale_center",
        0.45,
        "lower bound for φ1 + |∇φ1|^θ1 at the frame centre",
    ),
    (
        "ode_time_tol",
        1e-3,
        "absolute error allowed in the homogeneous blow-up time",
    ),
    (
        "ode_exponent_tol",
        0.02,
        "relative error of the max_u exponent in the homogeneous run",
    ),
    (
        "ode_ratio_tol",
        0.10,
        "relative error of the last-5 doubling ratio in the homogeneous run",
    ),
    (
        "transform_tol",
        1e-3,
        "sup |u − log(1+w)| allowed while max u stays below the cap",
    ),
    (
        "transform_refinement",
        3.0,
        "minimum reduction of that difference when N doubles",
    ),
    (
        "single_point_width",
        0.2,
        "final half-max width, in units of R, below which the set is single-point",
    ),
    (
        "global_width",
        0.5,
        "half-max width, in units of R, above which the set is global",
    ),
];

impl Default for Thresholds {
    fn default() -> Self {
        let mut t = Thresholds {
            exponent_tol: 0.0,
            product_factor: 0.0,
            ratio_spread: 0.0,
            symmetric_phi_tol: 0.0,
            doubling_ratio_tol: 0.0,
            doubling_tail: 0.0,
            rescale_sup: 0.0,
            rescale_center: 0.0,
            ode_time_tol: 0.0,
            ode_exponent_tol: 0.0,
            ode_ratio_tol: 0.0,
            transform_tol: 0.0,
            transform_refinement: 0.0,
            single_point_width: 0.0,
            global_width: 0.0,
        };
        for (name, value, _) in THRESHOLD_TABLE {
            t.set(name, value).expect("table names are fields");
        }
        t
    }
}

impl Thresholds {
    /// Overrides one threshold by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), PipelineError> {
        let slot = match name {
            "exponent_tol" => &mut self.exponent_tol,
            "product_factor" => &mut self.product_factor,
            "ratio_spread" => &mut self.ratio_spread,
            "symmetric_phi_tol" => &mut self.symmetric_phi_tol,
            "doubling_ratio_tol" => &mut self.doubling_ratio_tol,
            "doubling_tail" => &mut self.doubling_tail,
            "rescale_sup" => &mut self.rescale_sup,
            "rescale_center" => &mut self.rescale_center,
            "ode_time_tol" => &mut self.ode_time_tol,
            "ode_exponent_tol" => &mut self.ode_exponent_tol,
            "ode_ratio_tol" => &mut self.ode_ratio_tol,
            "transform_tol" => &mut self.transform_tol,
            "transform_refinement" => &mut self.transform_refinement,
            "single_point_width" => &mut self.single_point_width,
            "global_width" => &mut self.global_width,
            _ => {
                return Err(PipelineError::Unsupported(format!(
                    "unknown threshold `{name}`"
                )))
            }
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(PipelineError::Unsupported(format!(
                "threshold {name} = {value} must be positive and finite"
            )));
        }
        *slot = value;
        Ok(())
    }
}
