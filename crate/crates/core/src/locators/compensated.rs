//! The compensated one-terminal estimator.
//!
//! Inverters between the IED and the fault inject current that the IED
//! never sees, so the measured loop voltage misses the drop
//! `(d - d_k) * Z1 * I_k` for every upstream tap `k`. The compensation
//! voltage restores those drops, and because it depends on the unknown
//! distance the estimate is refined to a fixed point.

use crate::error::{Error, Result};
use crate::feeder::FeederSpec;
use crate::oracle::ScenarioRecord;
use crate::phasor::{from_sequence_unchecked, zero_seq_factor, Phasor, SequenceSet};

use super::loops::{polarizing_current, select_loop, LoopQuantities};
use super::{CurrentSource, DistanceEstimate, FixedPointScheme, LocatorConfig, Method};

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationInput {
    /// Ascending per-unit tap positions.
    pub tap_positions: Vec<f64>,
    /// Loop-consistent inverter current per tap.
    pub tap_currents: Vec<Phasor>,
    pub z1: Phasor,
}

impl CompensationInput {
    fn check(&self) -> Result<()> {
        if self.tap_positions.len() != self.tap_currents.len() {
            return Err(Error::InvalidInput(format!(
                "{} tap positions but {} tap currents",
                self.tap_positions.len(),
                self.tap_currents.len()
            )));
        }
        if self.tap_positions.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("tap positions must be ascending".into()));
        }
        Ok(())
    }

    fn upstream(&self, d: f64) -> impl Iterator<Item = (f64, Phasor)> + '_ {
        self.tap_positions.iter().zip(&self.tap_currents).filter(move |(p, _)| **p < d).map(|(p, i)| (*p, *i))
    }

    fn voltage_at(&self, d: f64) -> Phasor {
        -self.upstream(d).map(|(p, i)| self.z1 * i * (d - p)).sum::<Phasor>()
    }
}

/// `V_comp(d) = -sum_{k: d_k < d} (d - d_k) Z1 I_k`.
pub fn compensation_voltage(d: f64, comp: &CompensationInput) -> Result<Phasor> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::Range(format!("distance {d} outside [0, 1]")));
    }
    comp.check()?;
    Ok(comp.voltage_at(d))
}

/// Uniform split of the aggregate pre-fault proxy over `n_taps` inverters.
/// Empty when there are no taps or no proxy is available.
pub fn practical_proxy_currents(lq: &LoopQuantities, n_taps: usize) -> Vec<Phasor> {
    match lq.i_w_proxy {
        Some(iw) if n_taps > 0 => vec![iw / n_taps as f64; n_taps],
        _ => Vec::new(),
    }
}

/// `d = Im{(V_loop + V_comp) I_p*} / Im{Z1 I_loop I_p*}`, unclamped.
pub fn estimate_distance_once(lq: &LoopQuantities, v_comp: Phasor, z1: Phasor) -> Result<f64> {
    let pol = lq.i_polarizing.conj();
    let den = (z1 * lq.i_loop * pol).im;
    if !(den.abs() >= 1e-12) {
        return Err(Error::SingularLoop(den.abs()));
    }
    Ok(((lq.v_loop + v_comp) * pol).im / den)
}

/// One refinement pass from the current estimate `d`.
fn refine(lq: &LoopQuantities, comp: &CompensationInput, d: f64, scheme: FixedPointScheme) -> Result<f64> {
    match scheme {
        FixedPointScheme::Substitution => estimate_distance_once(lq, comp.voltage_at(d), comp.z1),
        FixedPointScheme::PiecewiseAffine => {
            if comp.upstream(d).next().is_none() {
                return estimate_distance_once(lq, Phasor::default(), comp.z1);
            }
            // With the upstream set frozen, V_comp(x) = A - x Z1 S, so the
            // distance equation becomes
            //   x Im{Z1 (I_loop + S) Ip*} = Im{(V_loop + A) Ip*}.
            let (s, a) = comp
                .upstream(d)
                .fold((Phasor::default(), Phasor::default()), |(s, a), (p, i)| (s + i, a + comp.z1 * i * p));
            let shifted = LoopQuantities { v_loop: lq.v_loop + a, i_loop: lq.i_loop + s, ..*lq };
            estimate_distance_once(&shifted, Phasor::default(), comp.z1)
        }
    }
}

/// Iterates the compensated estimate from the uncompensated start.
pub(crate) fn fixed_point(
    lq: &LoopQuantities,
    comp: &CompensationInput,
    cfg: &LocatorConfig,
) -> Result<(f64, usize, bool)> {
    comp.check()?;
    let mut d = estimate_distance_once(lq, Phasor::default(), comp.z1)?;
    for it in 1..=cfg.max_iterations {
        let next = refine(lq, comp, d, cfg.scheme)?;
        let step = (next - d).abs();
        d = next;
        if step <= cfg.tolerance {
            return Ok((d, it, true));
        }
    }
    Ok((d, cfg.max_iterations, false))
}

/// Loop-consistent per-tap currents recorded by the oracle.
fn ground_truth_currents(record: &ScenarioRecord, weights: [f64; 3], n_taps: usize) -> Result<Vec<Phasor>> {
    if record.tap_solutions.len() != n_taps {
        return Err(Error::InvalidInput(format!(
            "record {} carries {} tap solutions for {n_taps} taps",
            record.scenario_id,
            record.tap_solutions.len()
        )));
    }
    Ok(record
        .tap_solutions
        .iter()
        .map(|t| {
            from_sequence_unchecked(&SequenceSet::new(t.injected, t.injected_neg, Phasor::default())).combine(weights)
        })
        .collect())
}

pub fn locate_compensated(
    record: &ScenarioRecord,
    spec: &FeederSpec,
    cfg: &LocatorConfig,
    source: CurrentSource,
) -> Result<DistanceEstimate> {
    cfg.validate()?;
    let k0 = zero_seq_factor(&spec.line)? - 1.0;
    let mut lq = select_loop(
        record.fault.fault_type,
        &record.fault_v,
        &record.fault_i,
        record.prefault_i.as_ref(),
        k0,
        cfg.three_phase_pair,
    )?;
    if let Some(kind) = cfg.polarization {
        let (p, fallback) = polarizing_current(lq.weights, kind, &record.fault_i, record.prefault_i.as_ref(), k0)?;
        lq.i_polarizing = p;
        lq.polarization_fallback = fallback;
    }
    let n = spec.taps.len();
    let (tap_currents, mut fallback) = match source {
        CurrentSource::GroundTruth => (ground_truth_currents(record, lq.weights, n)?, false),
        CurrentSource::PracticalProxy => {
            let currents = practical_proxy_currents(&lq, n);
            let missing = n > 0 && currents.is_empty();
            (currents, missing)
        }
    };
    fallback |= lq.polarization_fallback;
    let comp = CompensationInput {
        tap_positions: if tap_currents.is_empty() { Vec::new() } else { spec.tap_positions() },
        tap_currents,
        z1: spec.line.z1,
    };
    let (d, iterations, converged) = fixed_point(&lq, &comp, cfg)?;
    let (d_hat, clamped) = cfg.clamp(d);
    Ok(DistanceEstimate { method: Method::Proposed, d_hat, iterations, converged, clamped, fallback })
}
