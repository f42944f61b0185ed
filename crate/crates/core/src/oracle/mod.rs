//! Quasi-static short-circuit oracle.
//!
//! Stands in for time-domain simulation: each scenario is solved as a
//! phasor steady state in which the inverter injections and the network
//! voltages are mutually consistent under [`IbrControlConfig`]. Records
//! produced here are the ground truth consumed by the locators.

mod control;
mod fault;
mod network;

pub use control::IbrControlConfig;
pub use fault::{interconnect, FaultClass, FaultSpec, FaultType};
pub use network::{solve_network, thevenin_at, NetworkSolution, TapInjections};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::FeederSpec;
use crate::phasor::{from_sequence_unchecked, Phasor, SequenceSet, ThreePhaseSet};

/// Fault location of the reference short-circuit level: the remote end.
pub const SHORT_CIRCUIT_REFERENCE: f64 = 1.0;

/// Per-tap penetration, each value in [0, 1].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PenetrationVector(pub Vec<f64>);

impl PenetrationVector {
    pub fn uniform(n: usize, p: f64) -> Self {
        Self(vec![p; n])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn validate(&self, n_taps: usize) -> Result<()> {
        if self.0.len() != n_taps {
            return Err(Error::InvalidInput(format!(
                "penetration vector has {} entries for {n_taps} taps",
                self.0.len()
            )));
        }
        if let Some(p) = self.0.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Range(format!("penetration {p} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Ground-truth positive-sequence current of one tap during the fault.
///
/// `toward_grid` and `toward_fault` split `injected` by superposition: the
/// share of this tap's injection returning through the IED to the grid
/// source, and the share entering the fault.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapSolution {
    pub injected: Phasor,
    #[serde(default)]
    pub injected_neg: Phasor,
    pub toward_grid: Phasor,
    pub toward_fault: Phasor,
    pub pcc_voltage: Phasor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentClass {
    /// No inverter between the IED and the fault.
    Primary,
    Secondary,
}

impl SegmentClass {
    pub fn classify(spec: &FeederSpec, distance: f64) -> Self {
        if spec.taps.iter().any(|t| t.position < distance) {
            SegmentClass::Secondary
        } else {
            SegmentClass::Primary
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SegmentClass::Primary => "primary",
            SegmentClass::Secondary => "secondary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub scenario_id: u64,
    pub fault: FaultSpec,
    pub penetration: PenetrationVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefault_v: Option<ThreePhaseSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefault_i: Option<ThreePhaseSet>,
    pub fault_v: ThreePhaseSet,
    pub fault_i: ThreePhaseSet,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tap_solutions: Vec<TapSolution>,
    #[serde(rename = "i_cc")]
    pub short_circuit_current: f64,
    pub segment_class: SegmentClass,
}

impl ScenarioRecord {
    /// Pre-fault phasors are present, so the pre-fault proxy and
    /// superposition polarization are usable.
    pub fn proxy_available(&self) -> bool {
        self.prefault_i.is_some()
    }

    /// Scales every voltage and current phasor by `k`.
    pub fn scaled(&self, k: Phasor) -> Self {
        let mut r = self.clone();
        r.prefault_v = r.prefault_v.map(|s| s.scale(k));
        r.prefault_i = r.prefault_i.map(|s| s.scale(k));
        r.fault_v = r.fault_v.scale(k);
        r.fault_i = r.fault_i.scale(k);
        for t in &mut r.tap_solutions {
            t.injected *= k;
            t.injected_neg *= k;
            t.toward_grid *= k;
            t.toward_fault *= k;
            t.pcc_voltage *= k;
        }
        r
    }
}

/// Converged operating point: the network solution and the injections
/// that produced it.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub solution: NetworkSolution,
    pub injections: TapInjections,
    pub iterations: usize,
}

fn unit_or(z: Phasor, fallback: Phasor) -> Phasor {
    let m = z.norm();
    if m > 1e-12 {
        z / m
    } else {
        fallback
    }
}

fn max_change(a: &NetworkSolution, b: &NetworkSolution) -> (f64, f64) {
    let mut diff = 0.0f64;
    let mut scale = 1.0f64;
    let mut visit = |x: &SequenceSet, y: &SequenceSet| {
        for (p, q) in [(x.pos, y.pos), (x.neg, y.neg), (x.zero, y.zero)] {
            diff = diff.max((p - q).norm());
            scale = scale.max(p.norm());
        }
    };
    visit(&a.ied_v, &b.ied_v);
    visit(&a.fault_v, &b.fault_v);
    for (x, y) in a.tap_v.iter().zip(&b.tap_v) {
        visit(x, y);
    }
    (diff, scale)
}

/// Damped fixed point between the network solve and the control law.
fn control_fixed_point(
    spec: &FeederSpec,
    fault: Option<&FaultSpec>,
    pen: &PenetrationVector,
    cfg: &IbrControlConfig,
    mut inj: TapInjections,
    fallback: &[Phasor],
) -> Result<OperatingPoint> {
    let emf = spec.source.emf;
    let mut prev: Option<NetworkSolution> = None;
    for it in 1..=cfg.max_iterations {
        let sol = solve_network(spec, fault, emf, &inj)?;
        let targets: Vec<(Phasor, Phasor)> = spec
            .taps
            .iter()
            .enumerate()
            .map(|(k, tap)| cfg.target_injection(&sol.tap_v[k], pen.0[k], tap.rated_power, fallback[k]))
            .collect();
        // Voltages alone can be blind to an injection (a tap on a bolted
        // fault node), so the control-law residual must vanish as well.
        let residual = targets
            .iter()
            .zip(inj.pos.iter().zip(&inj.neg))
            .map(|((t1, t2), (p, n))| (t1 - p).norm().max((t2 - n).norm()))
            .fold(0.0, f64::max);
        if let Some(p) = &prev {
            let (diff, scale) = max_change(&sol, p);
            if diff <= cfg.tolerance * scale && residual <= cfg.tolerance {
                return Ok(OperatingPoint { solution: sol, injections: inj, iterations: it });
            }
        }
        for (k, (t1, t2)) in targets.into_iter().enumerate() {
            let (p, n) = (inj.pos[k], inj.neg[k]);
            inj.pos[k] = p + (t1 - p) * cfg.damping;
            inj.neg[k] = n + (t2 - n) * cfg.damping;
        }
        prev = Some(sol);
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        context: match fault {
            Some(f) => format!("{} fault at d = {}", f.fault_type, f.distance),
            None => "pre-fault operating point".into(),
        },
    })
}

fn check_inputs(spec: &FeederSpec, pen: &PenetrationVector, cfg: &IbrControlConfig) -> Result<()> {
    spec.validate().into_result()?;
    pen.validate(spec.taps.len())?;
    cfg.validate()
}

fn prefault_point(spec: &FeederSpec, pen: &PenetrationVector, cfg: &IbrControlConfig) -> Result<OperatingPoint> {
    let emf_unit = unit_or(spec.source.emf, Phasor::new(1.0, 0.0));
    let mut inj = TapInjections::zeros(spec.taps.len());
    for (k, tap) in spec.taps.iter().enumerate() {
        inj.pos[k] = emf_unit * (pen.0[k] * tap.rated_power);
    }
    let fallback = vec![emf_unit; spec.taps.len()];
    control_fixed_point(spec, None, pen, cfg, inj, &fallback)
}

fn fault_point(
    spec: &FeederSpec,
    fault: &FaultSpec,
    pen: &PenetrationVector,
    cfg: &IbrControlConfig,
    pre: &OperatingPoint,
) -> Result<OperatingPoint> {
    fault.validate()?;
    let fallback: Vec<Phasor> = pre.solution.tap_v.iter().map(|v| unit_or(v.pos, Phasor::new(1.0, 0.0))).collect();
    control_fixed_point(spec, Some(fault), pen, cfg, pre.injections.clone(), &fallback)
}

fn phase(seq: &SequenceSet) -> ThreePhaseSet {
    from_sequence_unchecked(seq)
}

/// Balanced pre-fault steady state: IED voltage and current (current
/// flowing from the IED bus into the line) and the per-tap injections.
pub fn solve_prefault(
    spec: &FeederSpec,
    pen: &PenetrationVector,
    cfg: &IbrControlConfig,
) -> Result<(ThreePhaseSet, ThreePhaseSet, Vec<TapSolution>)> {
    check_inputs(spec, pen, cfg)?;
    let op = prefault_point(spec, pen, cfg)?;
    let taps = op
        .injections
        .pos
        .iter()
        .zip(&op.solution.tap_v)
        .map(|(&i, v)| TapSolution {
            injected: i,
            injected_neg: Phasor::default(),
            toward_grid: i,
            toward_fault: Phasor::default(),
            pcc_voltage: v.pos,
        })
        .collect();
    Ok((phase(&op.solution.ied_v), phase(&op.solution.ied_i), taps))
}

/// Superposition split of each tap's injection between the grid branch
/// and the fault branch, with the fault interconnection in place.
fn split_taps(spec: &FeederSpec, fault: &FaultSpec, op: &OperatingPoint) -> Result<Vec<TapSolution>> {
    let n = spec.taps.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut only = TapInjections::zeros(n);
        only.pos[k] = op.injections.pos[k];
        only.neg[k] = op.injections.neg[k];
        let part = solve_network(spec, Some(fault), Phasor::default(), &only)?;
        // Grid-branch current of this source alone, flowing back toward the grid.
        let toward_grid = -part.ied_i.pos;
        out.push(TapSolution {
            injected: op.injections.pos[k],
            injected_neg: op.injections.neg[k],
            toward_grid,
            toward_fault: part.fault_i.pos,
            pcc_voltage: op.solution.tap_v[k].pos,
        });
    }
    Ok(out)
}

/// Full fault scenario. The record's `scenario_id` is zero; callers that
/// generate batches assign it.
pub fn solve_fault(
    spec: &FeederSpec,
    fault: &FaultSpec,
    pen: &PenetrationVector,
    cfg: &IbrControlConfig,
) -> Result<ScenarioRecord> {
    check_inputs(spec, pen, cfg)?;
    let pre = prefault_point(spec, pen, cfg)?;
    let op = fault_point(spec, fault, pen, cfg, &pre)?;
    let tap_solutions = split_taps(spec, fault, &op)?;
    let reference = FaultSpec::new(FaultType::ABC, SHORT_CIRCUIT_REFERENCE, 0.0);
    let icc = phase(&fault_point(spec, &reference, pen, cfg, &pre)?.solution.ied_i).a.norm();
    Ok(ScenarioRecord {
        scenario_id: 0,
        fault: fault.clone(),
        penetration: pen.clone(),
        prefault_v: Some(phase(&pre.solution.ied_v)),
        prefault_i: Some(phase(&pre.solution.ied_i)),
        fault_v: phase(&op.solution.ied_v),
        fault_i: phase(&op.solution.ied_i),
        tap_solutions,
        short_circuit_current: icc,
        segment_class: SegmentClass::classify(spec, fault.distance),
    })
}

/// Converged fault operating point, for callers that need node-level detail.
pub fn fault_operating_point(
    spec: &FeederSpec,
    fault: &FaultSpec,
    pen: &PenetrationVector,
    cfg: &IbrControlConfig,
) -> Result<OperatingPoint> {
    check_inputs(spec, pen, cfg)?;
    let pre = prefault_point(spec, pen, cfg)?;
    fault_point(spec, fault, pen, cfg, &pre)
}

/// |I_a| at the IED for a bolted three-phase fault at the remote end.
pub fn short_circuit_magnitude(spec: &FeederSpec, pen: &PenetrationVector, cfg: &IbrControlConfig) -> Result<f64> {
    let reference = FaultSpec::new(FaultType::ABC, SHORT_CIRCUIT_REFERENCE, 0.0);
    let op = fault_operating_point(spec, &reference, pen, cfg)?;
    Ok(phase(&op.solution.ied_i).a.norm())
}
