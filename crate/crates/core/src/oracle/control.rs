use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::{Phasor, SequenceSet};

/// Quasi-static grid-following inverter behaviour.
///
/// Currents are in per-unit of the inverter rating; they are scaled by the
/// tap's `rated_power` when converted to the system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IbrControlConfig {
    pub current_limit: f64,
    pub ride_through_threshold: f64,
    /// Reactive current per unit of voltage dip below the threshold.
    pub reactive_gain: f64,
    pub negative_seq_injection: bool,
    /// Below this positive-sequence terminal voltage the phase-locked loop
    /// holds its pre-fault angle instead of tracking the collapsed voltage.
    pub phase_lock_min_voltage: f64,
    pub max_iterations: usize,
    /// Relative tolerance on node-voltage change between iterations.
    pub tolerance: f64,
    /// Fraction of the injection correction applied per iteration.
    pub damping: f64,
}

impl Default for IbrControlConfig {
    fn default() -> Self {
        Self {
            current_limit: 1.1,
            ride_through_threshold: 0.85,
            reactive_gain: 2.0,
            negative_seq_injection: false,
            phase_lock_min_voltage: 0.1,
            max_iterations: 100,
            tolerance: 1e-9,
            damping: 0.5,
        }
    }
}

impl IbrControlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.current_limit > 0.0) {
            return Err(Error::Config("current_limit must be > 0".into()));
        }
        if !(self.ride_through_threshold > 0.0 && self.ride_through_threshold < 1.0) {
            return Err(Error::Config("ride_through_threshold must lie in (0, 1)".into()));
        }
        if !(self.reactive_gain >= 0.0) {
            return Err(Error::Config("reactive_gain must be >= 0".into()));
        }
        if !(self.phase_lock_min_voltage >= 0.0 && self.phase_lock_min_voltage < self.ride_through_threshold) {
            return Err(Error::Config("phase_lock_min_voltage must lie in [0, ride_through_threshold)".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config("damping must lie in (0, 1]".into()));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config("tolerance and max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Target (positive, negative) sequence injection for a tap seeing
    /// `v` at its terminals while producing `penetration` of `rated_power`.
    /// `fallback` orients the current when the terminal voltage collapses.
    pub(crate) fn target_injection(
        &self,
        v: &SequenceSet,
        penetration: f64,
        rated_power: f64,
        fallback: Phasor,
    ) -> (Phasor, Phasor) {
        let vm = v.pos.norm();
        let unit = if vm > self.phase_lock_min_voltage.max(1e-12) { v.pos / vm } else { fallback };
        let limit = self.current_limit * rated_power;
        let power = penetration * rated_power;
        let active_demand = if vm > 0.0 { power / vm } else { f64::INFINITY };

        if vm >= self.ride_through_threshold {
            let ip = if power == 0.0 { 0.0 } else { active_demand.min(limit) };
            return (unit * ip, Phasor::default());
        }

        // Reactive priority below the ride-through threshold.
        let iq = (self.reactive_gain * (self.ride_through_threshold - vm)).min(self.current_limit) * rated_power;
        let room = (limit * limit - iq * iq).max(0.0).sqrt();
        let ip = if power == 0.0 { 0.0 } else { active_demand.min(room) };
        // Lagging the terminal voltage by 90 degrees delivers reactive power.
        let i1 = unit * Phasor::new(ip, -iq);

        let i2 = if self.negative_seq_injection {
            // Inductive response to the negative-sequence voltage, sharing
            // the same magnitude limit.
            let want = Phasor::new(0.0, self.reactive_gain * rated_power) * v.neg;
            let spare = (limit - i1.norm()).max(0.0);
            if want.norm() > spare && want.norm() > 0.0 {
                want * (spare / want.norm())
            } else {
                want
            }
        } else {
            Phasor::default()
        };
        (i1, i2)
    }
}
