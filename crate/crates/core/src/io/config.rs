//! Strict TOML run configuration.
//!
//! ```toml
//! [model]  p1, p2, q1, q2, n
//! [domain] kind = "ball" | "truncated-space", radius, boundary = "dirichlet" | "neumann"
//! [grid]   nodes
//! [time]   safety, reaction_cap, m_stop, t_max, record_every
//! [init]   kind = "gaussian" | "cosine_bump" | "constant", amplitude_u, amplitude_v, width
//! [fit]    window_lo, window_hi
//! ```
//!
//! Only the four powers are required. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::analysis::FitWindow;
use crate::grid::RadialGrid;
use crate::model::{Boundary, Domain, InitKind, InitSpec, SystemParams};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub fit: FitSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub p1: f64,
    pub p2: f64,
    pub q1: f64,
    pub q2: f64,
    #[serde(default = "default_n")]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Ball,
    TruncatedSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub kind: DomainKind,
    pub radius: f64,
    pub boundary: BoundaryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub safety: f64,
    pub reaction_cap: f64,
    pub m_stop: f64,
    pub t_max: f64,
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKindName {
    Gaussian,
    CosineBump,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub kind: InitKindName,
    pub amplitude_u: f64,
    pub amplitude_v: f64,
    /// Defaults to `0.3·radius`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub window_lo: f64,
    pub window_hi: f64,
}

fn default_n() -> usize {
    1
}

/// Documented defaults, one place.
pub mod defaults {
    pub const N: usize = 1;
    pub const RADIUS: f64 = 1.0;
    pub const NODES: usize = 801;
    pub const SAFETY: f64 = 0.4;
    pub const REACTION_CAP: f64 = 0.05;
    pub const M_STOP: f64 = 1e8;
    pub const T_MAX: f64 = 10.0;
    pub const RECORD_EVERY: usize = 50;
    pub const AMPLITUDE: f64 = 20.0;
    /// Initial width as a fraction of the radius.
    pub const WIDTH_FRACTION: f64 = 0.3;
    pub const WINDOW_LO: f64 = 1e-3;
    pub const WINDOW_HI: f64 = 1e-1;
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection {
            kind: DomainKind::Ball,
            radius: defaults::RADIUS,
            boundary: BoundaryKind::Dirichlet,
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nodes: defaults::NODES,
        }
    }
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            safety: defaults::SAFETY,
            reaction_cap: defaults::REACTION_CAP,
            m_stop: defaults::M_STOP,
            t_max: defaults::T_MAX,
            record_every: defaults::RECORD_EVERY,
        }
    }
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            kind: InitKindName::Gaussian,
            amplitude_u: defaults::AMPLITUDE,
            amplitude_v: defaults::AMPLITUDE,
            width: None,
        }
    }
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            window_lo: defaults::WINDOW_LO,
            window_hi: defaults::WINDOW_HI,
        }
    }
}

/// A validated configuration in the solver's own types.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub params: SystemParams,
    pub solver: SolverConfig,
    pub fit: FitWindow,
    pub grid: RadialGrid,
    /// The configuration with every default written out.
    pub echo: RunConfig,
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<Resolved, IoError> {
    RunConfig::from_toml(text)?.resolve()
}

impl RunConfig {
    /// Parses without range validation.
    pub fn from_toml(text: &str) -> Result<Self, IoError> {
        toml::from_str(text).map_err(|e| IoError::Parse(e.to_string()))
    }

    /// Minimal configuration: the four powers and defaults elsewhere.
    pub fn with_powers(p1: f64, p2: f64, q1: f64, q2: f64) -> Self {
        RunConfig {
            model: ModelSection {
                p1,
                p2,
                q1,
                q2,
                n: defaults::N,
            },
            domain: DomainSection::default(),
            grid: GridSection::default(),
            time: TimeSection::default(),
            init: InitSection::default(),
            fit: FitSection::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Fills derived defaults and checks every range.
    pub fn resolve(&self) -> Result<Resolved, IoError> {
        let mut echo = self.clone();
        let radius = self.domain.radius;
        let width = self.init.width.unwrap_or(defaults::WIDTH_FRACTION * radius);
        if self.init.kind != InitKindName::Constant {
            echo.init.width = Some(width);
        }
        let params = SystemParams {
            p1: self.model.p1,
            p2: self.model.p2,
            q1: self.model.q1,
            q2: self.model.q2,
            n: self.model.n,
            domain: match self.domain.kind {
                DomainKind::Ball => Domain::Ball { radius },
                DomainKind::TruncatedSpace => Domain::TruncatedSpace { radius },
            },
            boundary: match self.domain.boundary {
                BoundaryKind::Dirichlet => Boundary::Dirichlet,
                BoundaryKind::Neumann => Boundary::Neumann,
            },
            init: InitSpec {
                kind: match self.init.kind {
                    InitKindName::Gaussian => InitKind::Gaussian,
                    InitKindName::CosineBump => InitKind::CosineBump,
                    InitKindName::Constant => InitKind::Constant,
                },
                amplitude_u: self.init.amplitude_u,
                amplitude_v: self.init.amplitude_v,
                width,
            },
        };
        params
            .validate()
            .map_err(|e| IoError::Invalid(e.to_string()))?;
        if self.grid.nodes < 3 {
            return Err(IoError::Invalid(format!(
                "grid.nodes = {} but the radial stencils need N ≥ 3",
                self.grid.nodes
            )));
        }
        let grid = RadialGrid::new(self.grid.nodes, radius)
            .map_err(|e| IoError::Invalid(e.to_string()))?;
        let solver = SolverConfig {
            safety: self.time.safety,
            reaction_cap: self.time.reaction_cap,
            m_stop: self.time.m_stop,
            t_max: self.time.t_max,
            record_every: self.time.record_every,
        };
        solver
            .validate()
            .map_err(|e| IoError::Invalid(e.to_string()))?;
        let fit = FitWindow {
            lo: self.fit.window_lo,
            hi: self.fit.window_hi,
        };
        if !(fit.lo > 0.0 && fit.lo < fit.hi && fit.hi <= 1.0) {
            return Err(IoError::Invalid(format!(
                "fit window [{}, {}] must satisfy 0 < window_lo < window_hi ≤ 1",
                fit.lo, fit.hi
            )));
        }
        Ok(Resolved {
            params,
            solver,
            fit,
            grid,
            echo,
        })
    }

    /// Sets a numeric key such as `model.p1` or, when unambiguous, `p1`.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), IoError> {
        let mut doc = toml::Value::try_from(&*self).expect("configuration serializes");
        let (section, name) = match key.split_once('.') {
            Some((s, k)) => (s.to_string(), k.to_string()),
            None => (Self::section_of(key)?.to_string(), key.to_string()),
        };
        let table = doc
            .get_mut(&section)
            .and_then(|s| s.as_table_mut())
            .ok_or_else(|| IoError::Invalid(format!("unknown section `{section}`")))?;
        let integral = matches!(name.as_str(), "n" | "nodes" | "record_every");
        let entry = if integral {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(IoError::Invalid(format!(
                    "{key} = {value} must be a nonnegative integer"
                )));
            }
            toml::Value::Integer(value as i64)
        } else {
            toml::Value::Float(value)
        };
        let known = matches!(
            (section.as_str(), name.as_str()),
            ("model", "p1" | "p2" | "q1" | "q2" | "n")
                | ("domain", "radius")
                | ("grid", "nodes")
                | (
                    "time",
                    "safety" | "reaction_cap" | "m_stop" | "t_max" | "record_every"
                )
                | ("init", "amplitude_u" | "amplitude_v" | "width")
                | ("fit", "window_lo" | "window_hi")
        );
        if !known {
            return Err(IoError::Invalid(format!(
                "`{key}` is not a numeric configuration key"
            )));
        }
        table.insert(name, entry);
        *self = doc
            .try_into()
            .map_err(|e: toml::de::Error| IoError::Invalid(e.to_string()))?;
        Ok(())
    }

    fn section_of(key: &str) -> Result<&'static str, IoError> {
        Ok(match key {
            "p1" | "p2" | "q1" | "q2" | "n" => "model",
            "radius" => "domain",
            "nodes" => "grid",
            "safety" | "reaction_cap" | "m_stop" | "t_max" | "record_every" => "time",
            "amplitude_u" | "amplitude_v" | "width" => "init",
            "window_lo" | "window_hi" => "fit",
            _ => {
                return Err(IoError::Invalid(format!(
                    "`{key}` is not a numeric configuration key"
                )))
            }
        })
    }
}
