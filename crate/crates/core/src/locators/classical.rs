use crate::error::{Error, Result};
use crate::feeder::FeederSpec;
use crate::oracle::{FaultClass, FaultType, ScenarioRecord};
use crate::phasor::{zero_seq_factor, Phasor};

use super::compensated::estimate_distance_once;
use super::loops::{polarizing_current, select_loop, LoopQuantities, Polarization};
use super::{DistanceEstimate, LocatorConfig, Method};

/// Single-phase loop of the leading faulted phase, used by TAKZ on
/// double-line-to-ground faults.
fn leading_phase_ground_loop(fault: FaultType) -> FaultType {
    match fault.phases()[0] {
        0 => FaultType::AG,
        1 => FaultType::BG,
        _ => FaultType::CG,
    }
}

fn with_polarization(
    mut lq: LoopQuantities,
    kind: Polarization,
    record: &ScenarioRecord,
    k0: Phasor,
) -> Result<LoopQuantities> {
    let (p, fallback) = polarizing_current(lq.weights, kind, &record.fault_i, record.prefault_i.as_ref(), k0)?;
    lq.i_polarizing = p;
    lq.polarization_fallback = fallback;
    Ok(lq)
}

/// Classical one-terminal estimators, all clamped to the configured range.
///
/// * `Impedance`: `|V_loop / I_loop| / |Z1|`
/// * `Reactance`: `Im(V_loop / I_loop) / Im(Z1)`, i.e. the Takagi form
///   polarized by the loop current itself
/// * `Taks`: Takagi form polarized by the superposition loop current
/// * `Takn`: Takagi form polarized by the loop negative-sequence current
/// * `Takz`: Takagi form on the phase-to-ground loop polarized by 3I0
/// * `TakzNew`: zero-sequence polarization on the double-phase-to-ground loop
pub fn locate_classical(
    method: Method,
    record: &ScenarioRecord,
    spec: &FeederSpec,
    cfg: &LocatorConfig,
) -> Result<DistanceEstimate> {
    cfg.validate()?;
    let fault = record.fault.fault_type;
    if method == Method::Proposed || !method.applicable(fault) {
        return Err(Error::UnsupportedType(format!("method {method} on {fault} fault")));
    }
    let z1 = spec.line.z1;
    let k0 = zero_seq_factor(&spec.line)? - 1.0;
    let loop_type = match (method, fault.class()) {
        (Method::Takz, FaultClass::Dlg) => leading_phase_ground_loop(fault),
        _ => fault,
    };
    let lq =
        select_loop(loop_type, &record.fault_v, &record.fault_i, record.prefault_i.as_ref(), k0, cfg.three_phase_pair)?;

    let (d, fallback) = match method {
        Method::Impedance => {
            if lq.i_loop.norm() == 0.0 {
                return Err(Error::SingularLoop(0.0));
            }
            ((lq.v_loop / lq.i_loop).norm() / z1.norm(), false)
        }
        Method::Reactance | Method::Taks | Method::Takn | Method::Takz | Method::TakzNew => {
            let kind = match method {
                Method::Reactance => Polarization::Loop,
                Method::Taks => Polarization::Superposition,
                Method::Takn => Polarization::Negative,
                _ => Polarization::Zero,
            };
            // Uses the same path as the compensated estimator's starting
            // point so that both agree bit-for-bit without upstream taps.
            let lq = if kind == Polarization::for_class(fault.class()) && loop_type == fault {
                lq
            } else {
                with_polarization(lq, kind, record, k0)?
            };
            (estimate_distance_once(&lq, Phasor::default(), z1)?, lq.polarization_fallback)
        }
        Method::Proposed => unreachable!(),
    };
    let (d_hat, clamped) = cfg.clamp(d);
    Ok(DistanceEstimate { method, d_hat, iterations: 0, converged: true, clamped, fallback })
}
