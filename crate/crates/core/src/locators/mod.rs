//! One-terminal fault locators: the classical baselines and the
//! compensated fixed-point estimator.
//!
//! Every estimator here is a ratio built from IED phasors, so scaling all
//! phasors of a record by a common complex factor leaves the estimate
//! unchanged.

mod classical;
mod compensated;
mod loops;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::FeederSpec;
use crate::oracle::{FaultClass, FaultType, ScenarioRecord};

pub use classical::locate_classical;
pub use compensated::{
    compensation_voltage, estimate_distance_once, locate_compensated, practical_proxy_currents, CompensationInput,
};
pub use loops::{loop_weights, polarizing_current, select_loop, LoopQuantities, Polarization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Impedance,
    Reactance,
    Taks,
    Takn,
    Takz,
    TakzNew,
    Proposed,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Impedance,
        Method::Reactance,
        Method::Taks,
        Method::Takn,
        Method::Takz,
        Method::TakzNew,
        Method::Proposed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Impedance => "impedance",
            Method::Reactance => "reactance",
            Method::Taks => "taks",
            Method::Takn => "takn",
            Method::Takz => "takz",
            Method::TakzNew => "takz_new",
            Method::Proposed => "proposed",
        }
    }

    pub fn applicable(self, fault: FaultType) -> bool {
        match self {
            Method::Impedance | Method::Reactance | Method::Taks | Method::Proposed => true,
            Method::Takn => fault.class() != FaultClass::ThreePhase,
            Method::Takz => fault.involves_ground(),
            Method::TakzNew => fault.class() == FaultClass::Dlg,
        }
    }

    /// Uncompensated method sharing the compensated estimator's loop and
    /// polarization for this fault class.
    pub fn uncompensated_counterpart(fault: FaultType) -> Method {
        match fault.class() {
            FaultClass::Slg => Method::Takz,
            FaultClass::Dlg => Method::TakzNew,
            FaultClass::Ll => Method::Takn,
            FaultClass::ThreePhase => Method::Taks,
        }
    }

    /// Best-performing classical method per fault class, used as the
    /// reference when reporting improvements.
    pub fn baseline(class: FaultClass) -> Method {
        match class {
            FaultClass::Slg => Method::Takz,
            FaultClass::Dlg => Method::TakzNew,
            FaultClass::Ll => Method::Takn,
            FaultClass::ThreePhase => Method::Reactance,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let m = match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "impedance" => Method::Impedance,
            "reactance" => Method::Reactance,
            "taks" => Method::Taks,
            "takn" => Method::Takn,
            "takz" => Method::Takz,
            "takz_new" | "takznew" => Method::TakzNew,
            "proposed" | "compensated" => Method::Proposed,
            other => return Err(Error::Config(format!("unknown method '{other}'"))),
        };
        Ok(m)
    }
}

/// Where the compensated estimator takes per-tap inverter currents from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentSource {
    /// Per-tap currents recorded by the oracle.
    GroundTruth,
    /// Pre-fault IED current shared equally among taps.
    PracticalProxy,
}

impl FromStr for CurrentSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "truth" | "ground_truth" | "ground-truth" => Ok(CurrentSource::GroundTruth),
            "proxy" | "practical_proxy" | "practical-proxy" => Ok(CurrentSource::PracticalProxy),
            other => Err(Error::Config(format!("unknown current source '{other}'"))),
        }
    }
}

/// How each refinement pass treats the distance-dependent compensation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointScheme {
    /// Freeze the set of upstream taps at the current estimate and solve the
    /// resulting affine equation for `d` exactly.
    PiecewiseAffine,
    /// Evaluate the compensation at the current estimate and substitute it
    /// back into the distance equation.
    Substitution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocatorConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub clamp_range: (f64, f64),
    pub scheme: FixedPointScheme,
    /// Phase pair used for three-phase faults (`AB`, `BC` or `CA`).
    pub three_phase_pair: FaultType,
    /// Polarizing current of the compensated estimator; `None` selects the
    /// per-class default.
    pub polarization: Option<Polarization>,
}

impl Default for LocatorConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 50,
            clamp_range: (0.0, 1.0),
            scheme: FixedPointScheme::PiecewiseAffine,
            three_phase_pair: FaultType::AB,
            polarization: None,
        }
    }
}

impl LocatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("locator tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.clamp_range.0 <= self.clamp_range.1) {
            return Err(Error::Config("clamp range is inverted".into()));
        }
        if self.three_phase_pair.class() != FaultClass::Ll {
            return Err(Error::Config("three_phase_pair must be AB, BC or CA".into()));
        }
        Ok(())
    }

    fn clamp(&self, d: f64) -> (f64, bool) {
        let c = d.clamp(self.clamp_range.0, self.clamp_range.1);
        (c, c != d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub method: Method,
    pub d_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub clamped: bool,
    /// A fallback was taken: pre-fault data were missing, so polarization
    /// or compensation was degraded.
    pub fallback: bool,
}

/// Dispatches to the classical or compensated estimator.
pub fn locate(
    method: Method,
    record: &ScenarioRecord,
    spec: &FeederSpec,
    cfg: &LocatorConfig,
    source: CurrentSource,
) -> Result<DistanceEstimate> {
    match method {
        Method::Proposed => locate_compensated(record, spec, cfg, source),
        m => locate_classical(m, record, spec, cfg),
    }
}
