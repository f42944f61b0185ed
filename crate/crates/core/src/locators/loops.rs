use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{FaultClass, FaultType};
use crate::phasor::{from_sequence_unchecked, to_sequence, Phasor, SequenceSet, ThreePhaseSet};

/// Fault-component current used in place of the inaccessible fault-point
/// current when removing the fault-resistance term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// Zero-sequence (residual) current of the loop.
    Zero,
    /// Negative-sequence current of the loop.
    Negative,
    /// Loop current minus its pre-fault value.
    Superposition,
    /// The loop current itself (reactance behaviour).
    Loop,
}

impl Polarization {
    /// Default polarization of the compensated estimator per fault class.
    pub fn for_class(class: FaultClass) -> Self {
        match class {
            FaultClass::Slg | FaultClass::Dlg => Polarization::Zero,
            FaultClass::Ll => Polarization::Negative,
            FaultClass::ThreePhase => Polarization::Superposition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopQuantities {
    pub fault_type: FaultType,
    /// Phase weights defining the loop, e.g. `[1, -1, 0]` for AB.
    pub weights: [f64; 3],
    pub v_loop: Phasor,
    pub i_loop: Phasor,
    pub i_polarizing: Phasor,
    /// Aggregate inverter injection estimated from pre-fault IED current.
    pub i_w_proxy: Option<Phasor>,
    /// Superposition polarization was requested without pre-fault data.
    pub polarization_fallback: bool,
}

/// Phase weights of the measurement loop for a fault type. Three-phase
/// faults use the phase-pair loop `pair`.
pub fn loop_weights(fault: FaultType, pair: FaultType) -> Result<[f64; 3]> {
    let f = if fault == FaultType::ABC {
        if pair.class() != FaultClass::Ll {
            return Err(Error::UnsupportedType(format!("three-phase loop pair {pair}")));
        }
        pair
    } else {
        fault
    };
    let ph = f.phases();
    let mut w = [0.0; 3];
    match f.class() {
        FaultClass::Slg => w[ph[0]] = 1.0,
        FaultClass::Ll => {
            w[ph[0]] = 1.0;
            w[ph[1]] = -1.0;
        }
        FaultClass::Dlg => {
            w[ph[0]] = 1.0;
            w[ph[1]] = 1.0;
        }
        FaultClass::ThreePhase => unreachable!(),
    }
    Ok(w)
}

fn residual(i: &ThreePhaseSet) -> Phasor {
    (i.a + i.b + i.c) / 3.0
}

fn loop_current(weights: [f64; 3], i: &ThreePhaseSet, k0: Phasor) -> Phasor {
    let ground: f64 = weights.iter().sum();
    i.combine(weights) + k0 * ground * residual(i)
}

/// Polarizing current of a loop. Returns the current and whether a
/// fallback to the loop current was needed.
pub fn polarizing_current(
    weights: [f64; 3],
    kind: Polarization,
    fault_i: &ThreePhaseSet,
    prefault_i: Option<&ThreePhaseSet>,
    k0: Phasor,
) -> Result<(Phasor, bool)> {
    let i_loop = loop_current(weights, fault_i, k0);
    let out = match kind {
        Polarization::Loop => (i_loop, false),
        Polarization::Zero => {
            let ground: f64 = weights.iter().sum();
            if ground == 0.0 {
                return Err(Error::UnsupportedType("zero-sequence polarization of an ungrounded loop".into()));
            }
            (residual(fault_i) * (3.0 * ground), false)
        }
        Polarization::Negative => {
            let seq = to_sequence(fault_i)?;
            let neg_only = from_sequence_unchecked(&SequenceSet::new(Phasor::default(), seq.neg, Phasor::default()));
            (neg_only.combine(weights), false)
        }
        Polarization::Superposition => match prefault_i {
            Some(pre) => (i_loop - loop_current(weights, pre, k0), false),
            None => (i_loop, true),
        },
    };
    Ok(out)
}

/// Loop quantities for `fault` from IED phasors.
///
/// `k0` multiplies the residual current `I0 = (Ia+Ib+Ic)/3` in ground
/// loops (`I_loop = sum(w*I) + sum(w)*k0*I0`). With sequence line
/// impedances the loop is exact for `k0 = Z0/Z1 - 1`.
///
/// The polarizing current is the compensated estimator's default for the
/// fault class; use [`polarizing_current`] for the others.
pub fn select_loop(
    fault: FaultType,
    fault_v: &ThreePhaseSet,
    fault_i: &ThreePhaseSet,
    prefault_i: Option<&ThreePhaseSet>,
    k0: Phasor,
    three_phase_pair: FaultType,
) -> Result<LoopQuantities> {
    if !fault_v.is_finite() || !fault_i.is_finite() {
        return Err(Error::InvalidInput("non-finite fault phasors".into()));
    }
    let weights = loop_weights(fault, three_phase_pair)?;
    let (i_polarizing, polarization_fallback) =
        polarizing_current(weights, Polarization::for_class(fault.class()), fault_i, prefault_i, k0)?;
    // IED currents are measured into the feeder; the exported pre-fault
    // current is the negated aggregate injection.
    let i_w_proxy = prefault_i.map(|pre| -pre.combine(weights));
    Ok(LoopQuantities {
        fault_type: fault,
        weights,
        v_loop: fault_v.combine(weights),
        i_loop: loop_current(weights, fault_i, k0),
        i_polarizing,
        i_w_proxy,
        polarization_fallback,
    })
}
